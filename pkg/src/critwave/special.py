"""Real-argument Gamma, reciprocal Gamma and zeta values.

Everything that needs a Gamma or zeta value goes through here so that
pole handling is done in one place: products of reciprocal Gammas vanish
exactly at the poles, which is how the closed-form constants degenerate.
"""
import numpy as np
from scipy import special as _sp


def rgamma(x):
    """1/Gamma(x), exactly 0 at x = 0, -1, -2, ..."""
    return _sp.rgamma(x)


def gamma(x):
    return _sp.gamma(x)


def log_abs_gamma(x):
    """Return (log|Gamma(x)|, sign Gamma(x)); reflection is handled by scipy."""
    return _sp.gammaln(x), _sp.gammasgn(x)


def is_gamma_pole(x, eps=1e-12):
    x = np.asarray(x, dtype=float)
    return (x <= 0) & (np.abs(x - np.round(x)) < eps)


def gamma_ratio(num, den):
    """prod Gamma(num_i) / prod Gamma(den_j) evaluated in log scale.

    Returns 0.0 if any denominator argument sits on a pole. Numerator poles
    raise, since none of the constants here is meant to blow up.
    """
    if any(is_gamma_pole(d) for d in den):
        return 0.0
    if any(is_gamma_pole(n) for n in num):
        raise ZeroDivisionError(f"Gamma pole in numerator: {num}")
    logv, sign = 0.0, 1.0
    for a in num:
        lg, sg = log_abs_gamma(a)
        logv += lg
        sign *= sg
    for b in den:
        lg, sg = log_abs_gamma(b)
        logv -= lg
        sign *= sg
    return float(sign * np.exp(logv))


def zeta(x):
    """Riemann zeta for real x > 1."""
    x = float(x)
    if not x > 1.0:
        raise ValueError(f"zeta is only provided for x > 1, got {x}")
    return float(_sp.zeta(x, 1.0))
