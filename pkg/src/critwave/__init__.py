"""Critical points of Gaussian random monochromatic waves with a regularity
parameter s: Neumann-Bessel series, Kac-Rice expectations and Monte-Carlo
counts."""
from .bessel import BesselBlock, bessel_block, truncation_order
from .series import (RegularityModel, SeriesSpec, SeriesValue, derivative_series,
                     series_asymptotic, series_direct, arccos_moment)
from .kac_rice import (AbsQuadraticCoeffs, CovarianceState, KappaResult, abs_gaussian_integral,
                       covariance_state, expected_critical_points, kac_rice_integrand,
                       kappa_constant, kappa_monotonicity_scan, periodic_average)
from .wave import (CountRecord, CriticalPoint, WaveSample, empirical_expectation, evaluate,
                   exponent_fit, far_field_predict, find_critical_points, linear_law_per_sample,
                   sample_wave)
from .density import (DensityRealization, DyadicProfile, count_density_critical_points,
                      density_eval, dyadic_profile)

__version__ = "0.1.0"
