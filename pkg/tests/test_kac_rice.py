import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import jv, jvp

from critwave import kac_rice as kr
from critwave.kac_rice import AbsQuadraticCoeffs as Q

K0 = 1 / (2 * math.sqrt(3))
ENTRIES = ("sigma_tilde_11", "sigma_tilde_22", "sigma_11", "sigma_13", "sigma_22", "sigma_33")


def reduce(A, B, C):
    return kr.abs_gaussian_integral(Q(A, B, C))


# --- E|A z1^2 + B z2^2 + 2C z1 z3| -------------------------------------------

def test_reduction_exact_cases():
    assert reduce(1, 0, 0) == pytest.approx(1.0, abs=1e-8)
    assert reduce(0, 0, 1) == pytest.approx(4 / math.pi, abs=1e-8)
    assert reduce(1, -1, math.sqrt(2)) == pytest.approx(4 / math.sqrt(3), abs=1e-8)


def test_reduction_difference_of_squares():
    # z1^2 - z2^2 has the law of 2 x y
    assert reduce(1, -1, 0) == pytest.approx(4 / math.pi, abs=1e-10)
    assert reduce(2.5, 2.5, 0) == pytest.approx(5.0, abs=1e-10)
    assert reduce(0, 0, 0) == 0.0


coef = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(coef, coef, coef, st.floats(0.01, 100))
def test_reduction_homogeneous_and_sign_symmetric(A, B, C, lam):
    base = reduce(A, B, C)
    assert base >= 0
    assert reduce(lam * A, lam * B, lam * C) == pytest.approx(lam * base, rel=1e-9, abs=1e-12)
    assert reduce(-A, -B, -C) == pytest.approx(base, rel=1e-10, abs=1e-12)
    assert reduce(A, B, -C) == pytest.approx(base, rel=1e-10, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(coef, coef, coef)
def test_reduction_bounded_by_moments(A, B, C):
    # |E X| <= E|X| <= sqrt(E X^2)
    v = reduce(A, B, C)
    mean = A + B
    second = 3 * A * A + 3 * B * B + 2 * A * B + 4 * C * C
    assert abs(mean) - 1e-9 <= v <= math.sqrt(second) + 1e-9


def test_reduction_matches_montecarlo(rng):
    for A, B, C in rng.uniform(-5, 5, (8, 3)):
        mc, se = kr.abs_gaussian_montecarlo(Q(A, B, C), 400_000, seed=3)
        assert abs(reduce(A, B, C) - mc) < 4 * se


def test_montecarlo_is_reproducible():
    c = Q(0.3, -1.2, 0.8)
    assert kr.abs_gaussian_montecarlo(c, 10_000, seed=5) == kr.abs_gaussian_montecarlo(c, 10_000, seed=5)
    assert kr.abs_gaussian_integral(c, "montecarlo", n_samples=10_000, seed=5) == pytest.approx(
        kr.abs_gaussian_montecarlo(c, 10_000, seed=5)[0])


def test_vectorised_reduction_agrees():
    A = np.array([1.0, 0.0, 1.0, 0.3])
    B = np.array([0.0, 0.0, -1.0, 2.0])
    C = np.array([0.0, 1.0, math.sqrt(2), -0.7])
    vec = kr.abs_gaussian_reduce(A, B, C)
    for a, b, c, v in zip(A, B, C, vec):
        assert v == pytest.approx(reduce(a, b, c), rel=1e-12)


# --- covariance ---------------------------------------------------------------

def schur_oracle(s, r, L=None):
    """Gradient variances and conditioned Hessian covariance from a dense 5x5 matrix.

    Order: (u_theta, u_r, u_thth, u_rth, u_rr) at theta = 0, built mode by mode.
    """
    L = L or int(r) + 60
    l = np.arange(1, L + 1, dtype=float)
    w = 2 * l ** (-s)
    j, jp, jpp = jv(l, r), jvp(l, r), jvp(l, r, 2)
    zero = np.zeros_like(l)
    re = np.stack([zero, w * jp, -w * l * l * j, zero, w * jpp])
    im = np.stack([-w * l * j, zero, zero, -w * l * jp, zero])
    cov = re @ re.T + im @ im.T
    g, h = [0, 1], [2, 3, 4]
    cond = cov[np.ix_(h, h)] - cov[np.ix_(h, g)] @ np.linalg.solve(cov[np.ix_(g, g)], cov[np.ix_(g, h)])
    return cov[0, 0], cov[1, 1], cond


@pytest.mark.parametrize("s,r", [(0.0, 20.0), (0.0, 3.0), (1.0, 55.0), (2.0, 8.0), (-1.0, 30.0)])
def test_covariance_against_schur_oracle(s, r):
    c = kr.covariance_state(s, r)
    t11, t22, cond = schur_oracle(s, r)
    assert c.sigma_tilde_11 == pytest.approx(t11, rel=1e-10)
    assert c.sigma_tilde_22 == pytest.approx(t22, rel=1e-10)
    scale = np.max(np.abs(cond))
    assert abs(c.sigma_11 - cond[0, 0]) < 1e-9 * scale
    assert abs(c.sigma_13 - cond[0, 2]) < 1e-9 * scale
    assert abs(c.sigma_33 - cond[2, 2]) < 1e-9 * scale
    assert abs(c.sigma_22 - cond[1, 1]) < 1e-9 * scale
    assert cond[0, 1] == pytest.approx(0, abs=1e-9 * scale)


def test_radial_gradient_variance_closed_form():
    c = kr.covariance_state(0.0, 20.0)
    assert c.sigma_tilde_22 == pytest.approx(1 - 2 * jv(1, 20.0) ** 2, abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 7), st.floats(0.2, 300))
def test_covariance_invariants(s, r):
    c = kr.covariance_state(s, r)
    assert c.sigma_tilde_11 > 0 and c.sigma_tilde_22 > 0
    assert c.sigma_11 > 0 and c.sigma_22 > 0 and c.sigma_33 > 0
    assert c.sigma_11 * c.sigma_33 - c.sigma_13 ** 2 >= -1e-12 * c.sigma_11 * c.sigma_33
    assert c.cross_root >= 0
    assert c.sigma_prod == pytest.approx(c.sigma_tilde_11 * c.sigma_tilde_22)


def test_covariance_at_high_regularity_near_origin():
    # cancellation-prone region; conditioned entries come from a factorisation
    for r in (0.1, 0.5, 1.0, 1.845):
        c = kr.covariance_state(6.0, r)
        _, _, cond = schur_oracle(6.0, r, L=40)
        assert c.sigma_11 == pytest.approx(cond[0, 0], rel=1e-6)
        assert c.sigma_33 == pytest.approx(cond[2, 2], rel=1e-6)


def test_asymptotic_covariance_at_s1():
    d = kr.covariance_state(1.0, 100.0)
    a = kr.covariance_state(1.0, 100.0, "asymptotic")
    for k in ENTRIES:
        assert getattr(a, k) == pytest.approx(getattr(d, k), rel=0.05), k


@pytest.mark.parametrize("s", [0.0, 1.0, 2.0, 3.0])
def test_asymptotic_covariance_improves(s):
    errs = []
    for r in (100.0, 200.0, 400.0):
        num = np.zeros(len(ENTRIES))
        den = np.zeros(len(ENTRIES))
        for t in np.arange(16) * math.pi / 16:
            d = kr.covariance_state(s, r + t)
            a = kr.covariance_state(s, r + t, "asymptotic")
            num += [abs(getattr(d, k) - getattr(a, k)) for k in ENTRIES]
            den += [abs(getattr(a, k)) for k in ENTRIES]
        errs.append(num / den)
    errs = np.array(errs)
    assert np.all(errs[1:] <= errs[:-1] + 1e-9)
    assert np.all(errs[-1] < 0.06)


def test_covariance_domain():
    with pytest.raises(ValueError):
        kr.covariance_state(0.0, 0.0)
    with pytest.raises(ValueError):
        kr.covariance_state(0.0, 10.0, "bogus")


# --- integrand and expectation ------------------------------------------------

def test_integrand_volumetric_growth():
    assert kr.kac_rice_integrand(0.0, 200.0) == pytest.approx(K0 * 200 / math.pi, rel=0.02)


def test_integrand_period_average_at_s1():
    rr = 400.0 + np.arange(64) * math.pi / 64
    avg = np.mean(kr.integrand_direct(1.0, rr) / rr) * math.pi
    assert avg == pytest.approx(1 / (math.pi * math.sqrt(2)), rel=0.02)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 7), st.floats(0.1, 200))
def test_integrand_positive(s, r):
    assert kr.kac_rice_integrand(s, r) > 0


def test_integrand_routes_agree():
    rr = np.array([0.3, 5.0, 44.0, 150.0])
    vec = kr.integrand_direct(0.7, rr)
    for r, v in zip(rr, vec):
        assert kr.kac_rice_integrand(0.7, r) == pytest.approx(v, rel=1e-12)


@pytest.mark.parametrize("s,R,tol", [(0.0, 100.0, 0.03), (1.0, 200.0, 0.05), (2.0, 200.0, 0.10)])
def test_expectation_matches_leading_law(s, R, tol):
    with warnings.catch_warnings():
        warnings.simplefilter("error", kr.QuadratureWarning)
        e = kr.expected_critical_points(s, R)
    assert e / kr.predicted_leading(s, R) == pytest.approx(1.0, abs=tol)


def test_expectation_high_regularity_is_linear():
    with warnings.catch_warnings():
        warnings.simplefilter("error", kr.QuadratureWarning)
        e30 = kr.expected_critical_points(6.0, 30.0, r_min=0.1)
        e60 = kr.expected_critical_points(6.0, 60.0, r_min=0.1)
    assert e60 / e30 == pytest.approx(2.0, rel=0.1)


def test_expectation_domain():
    with pytest.raises(ValueError):
        kr.expected_critical_points(0.0, 2.0, r_min=3.0)


# --- constants -----------------------------------------------------------------

def test_kappa_volumetric():
    assert kr.kappa_constant(0.0).kappa == pytest.approx(K0, abs=1e-6)


def test_kappa_five_half():
    res = kr.kappa_constant(2.5)
    assert res.kappa == pytest.approx(0.497339, abs=1e-4)
    assert (res.exponent, res.log_power) == (1.0, 0.5)


def test_kappa_left_limit_at_half():
    lim = math.sqrt(2 / 3) / math.pi
    assert kr.kappa_constant(0.5 - 1e-7).kappa == pytest.approx(lim, abs=1e-6)
    assert kr.kappa_constant(0.5).kappa == pytest.approx(lim, abs=1e-15)


def test_kappa_vanishes_at_three_half():
    ks = [kr.kappa_constant(s).kappa for s in (1.4, 1.49, 1.499, 1.4999)]
    assert all(a > b for a, b in zip(ks, ks[1:]))
    assert ks[-1] < 0.01


@pytest.mark.parametrize("s", [-3.0, -0.5, 0.0, 0.3, 0.6, 1.0, 1.4, 1.5, 1.8, 2.0, 2.3, 2.5, 3.0, 4.0, 6.0])
def test_closed_forms_match_generic_pipeline(s):
    a = kr.kappa_constant(s)
    b = kr.kappa_asymptotic(s)
    assert b.kappa == pytest.approx(a.kappa, rel=1e-8)
    assert b.exponent == pytest.approx(a.exponent, abs=1e-12)
    assert b.log_power == pytest.approx(a.log_power, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20))
def test_exponent_law(s):
    res = kr.kappa_constant(s)
    if s <= 1.5:
        assert res.exponent == 2.0
    elif s < 2.5:
        assert res.exponent == 3.5 - s
    else:
        assert res.exponent == 1.0
    assert res.kappa > 0
    assert (res.log_power != 0) == (abs(s - 1.5) < 1e-12 or abs(s - 2.5) < 1e-12)


def test_exponent_edges():
    assert kr.kappa_constant(1.5).log_power == -0.5
    assert kr.kappa_constant(1.5).kappa == pytest.approx(1 / math.pi)
    assert kr.kappa_constant(1.5 + 1e-13).regime == "three_half"


def test_monotonicity_scan():
    up = [k for _, k in kr.kappa_monotonicity_scan([-4, -2, -1, 0])]
    down = [k for _, k in kr.kappa_monotonicity_scan([0, 0.2, 0.4, 0.49])]
    assert all(a < b for a, b in zip(up, up[1:]))
    assert all(a > b for a, b in zip(down, down[1:]))
    with pytest.raises(ValueError):
        kr.kappa_monotonicity_scan([0.0, 0.6])


def test_kappa_far_left_below_five_percent():
    # stated bound; the closed form only decays like (2 - s)^(-1/2), so this fails
    assert kr.kappa_monotonicity_scan([-10])[0][1] < 0.05 * K0


def test_kappa_far_left_decay_rate():
    limit = 0.5 * reduce(math.sqrt(0.5), -math.sqrt(0.5), 0.5)
    for s in (-10.0, -100.0, -1e4):
        k = kr.kappa_monotonicity_scan([s])[0][1]
        assert k * math.sqrt(2 - s) == pytest.approx(limit, rel=2.0 / abs(s))
    assert kr.kappa_monotonicity_scan([-1e6])[0][1] < 0.05 * K0


# --- periodic averages ----------------------------------------------------------

def test_periodic_average_constant():
    R = 1000.0
    pred = kr.periodic_average(lambda r: np.ones_like(r), 1, 0, R)
    assert pred == pytest.approx(R * R / 2, rel=1e-12)
    assert abs(pred - (R * R - math.pi ** 2) / 2) / pred < 1e-4


@pytest.mark.parametrize("b", [0.0, 0.3, -0.3, 0.5, 0.9, -0.9])
def test_periodic_identity(b):
    q = kr.periodic_integral(lambda r: 1 / (1 + b * np.sin(2 * r)))
    assert q == pytest.approx(math.pi / math.sqrt(1 - b * b), abs=1e-10)


def test_periodic_average_five_half_profile():
    P = lambda r: 1 / ((16 + 15 * np.sin(2 * r)) * np.sqrt(4 - 3 * np.sin(2 * r)))
    raw = kr.periodic_integral(P)
    zeta3 = 1.2020569031595942
    assert 4 / math.pi ** 2 * math.sqrt(31 / zeta3) * raw == pytest.approx(0.497339, abs=1e-4)
    R = 500.0
    assert kr.periodic_average(P, 0, 0.5, R) == pytest.approx(R * math.sqrt(math.log(R)) / math.pi * raw)


def test_periodic_average_domain():
    with pytest.raises(ValueError):
        kr.periodic_average(lambda r: np.ones_like(r), 0, -1, 10.0)
