"""Kac-Rice expectation of the number of critical points in a disk.

The gradient (u_theta, u_r) at radius r has variances sigma_tilde_11,
sigma_tilde_22; conditioned on it vanishing, the Hessian entries have the
covariance entries sigma_11, sigma_13, sigma_22, sigma_33. The Kac-Rice
density is then E|det| / (2 pi sqrt(sigma_tilde_11 sigma_tilde_22)), and
the expected count in the disk of radius R is 2 pi times its radial
integral.
"""
from dataclasses import dataclass
import math
import warnings

import numpy as np

from .asymptotics import Leading, dominant
from .quadrature import adaptive_gauss, periodic_trapezoid, tanh_sinh
from .bessel import bessel_table, truncation_order
from .series import HALF_EPS, as_model, kind_leading, kind_sums_direct
from .special import gamma_ratio, zeta


class CovarianceError(ArithmeticError):
    """A covariance invariant failed; this signals loss of accuracy."""


class QuadratureWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class CovarianceState:
    r: float
    sigma_tilde_11: float
    sigma_tilde_22: float
    sigma_11: float
    sigma_13: float
    sigma_22: float
    sigma_33: float
    cross_root: float
    sigma_prod: float


@dataclass(frozen=True)
class AbsQuadraticCoeffs:
    A: float
    B: float
    C: float


@dataclass(frozen=True)
class KappaResult:
    s: float
    regime: str
    kappa: float
    exponent: float
    log_power: float


# --- E|A z1^2 + B z2^2 + 2 C z1 z3| ---------------------------------------

def _reduction_numerator(t, A, B, C):
    """1 - a(t) cos(Phi(t)/2) in a cancellation-free form.

    With a = exp(L) this is -expm1(L) + 2 exp(L) sin^2(Phi/4), a sum of two
    nonnegative terms.
    """
    t2 = t * t
    with np.errstate(divide="ignore"):
        log_q = np.logaddexp(2.0 * np.log1p(4.0 * C * C * t2), np.log(4.0 * A * A * t2))
    L = -0.25 * (np.log1p(4.0 * B * B * t2) + log_q)
    # Phi continuous in t, starting at 0
    phi = -np.arctan(2.0 * B * t) - np.arctan2(2.0 * A * t, 1.0 + 4.0 * C * C * t2)
    return -np.expm1(L) + 2.0 * np.exp(L) * np.sin(0.25 * phi) ** 2


def abs_gaussian_reduce(A, B, C, chunk=256):
    """Vectorised reduction formula; A, B, C broadcast against each other."""
    A, B, C = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (A, B, C)))
    shape = A.shape
    A, B, C = A.ravel(), B.ravel(), C.ravel()
    scale = np.maximum(np.maximum(np.abs(A), np.abs(B)), np.abs(C))
    out = np.zeros(A.size)
    nz = np.nonzero(scale > 0)[0]
    for start in range(0, nz.size, chunk):
        idx = nz[start: start + chunk]
        sc = scale[idx][:, None]
        a, b, c = A[idx][:, None] / sc, B[idx][:, None] / sc, C[idx][:, None] / sc

        def integrand(x, xc):
            t = np.maximum(x, 1e-150)[None, :]
            low = _reduction_numerator(t, a, b, c) / (t * t)
            # the piece over [1, inf) after t = 1/x
            high = _reduction_numerator(1.0 / t, a, b, c)
            return low + high

        val, ok = tanh_sinh(integrand, rtol=1e-12)
        if not np.all(ok):
            warnings.warn("reduction quadrature did not converge", QuadratureWarning)
        out[idx] = (2.0 / math.pi) * scale[idx] * val
    return out.reshape(shape)


def abs_gaussian_montecarlo(c, n_samples=10 ** 6, seed=0, chunk=10 ** 5):
    """(mean, standard error) of |A z1^2 + B z2^2 + 2C z1 z3| by sampling.

    The sample budget is split into chunks with independent Philox streams
    spawned from seed, and partial sums are combined in chunk order.
    """
    n_chunks = max(1, -(-n_samples // chunk))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    total = total_sq = 0.0
    done = 0
    for child in children:
        m = min(chunk, n_samples - done)
        rng = np.random.Generator(np.random.Philox(child))
        z = rng.standard_normal((3, m))
        v = np.abs(c.A * z[0] ** 2 + c.B * z[1] ** 2 + 2.0 * c.C * z[0] * z[2])
        total += float(v.sum())
        total_sq += float((v * v).sum())
        done += m
    mean = total / done
    var = max(total_sq / done - mean * mean, 0.0) * done / max(done - 1, 1)
    return mean, math.sqrt(var / done)


def abs_gaussian_integral(c, method="reduction", n_samples=10 ** 6, seed=0):
    for v in (c.A, c.B, c.C):
        if not math.isfinite(v):
            raise ValueError("coefficients must be finite")
    if method == "reduction":
        return float(abs_gaussian_reduce(c.A, c.B, c.C))
    if method == "montecarlo":
        return abs_gaussian_montecarlo(c, n_samples, seed)[0]
    raise ValueError(f"unknown method {method!r}")


# --- covariance -----------------------------------------------------------

def _assemble(S, sqrt):
    """Covariance entries from S[k][kind] = sum l^{2k} sigma_l^2 (kind)."""
    s0, s1, s2 = S[0], S[1], S[2]
    st11 = 4 * s1["JJ"]
    st22 = 4 * s0["JpJp"]
    jjp = s1["JJp"]
    s11 = 4 * s2["JJ"] - 4 * (jjp * jjp) / s0["JpJp"]
    s22 = 4 * s1["JpJp"] - 4 * (jjp * jjp) / s1["JJ"]
    s13 = -4 * s1["JJpp"] + 4 * (jjp * s0["JpJpp"]) / s0["JpJp"]
    s33 = 4 * s0["JppJpp"] - 4 * (s0["JpJpp"] * s0["JpJpp"]) / s0["JpJp"]
    disc = s11 * s33 - s13 * s13
    return st11, st22, s11, s13, s22, s33, disc


def _check_direct(r, st11, st22, s11, s13, s22, s33, disc):
    names = ("sigma_tilde_11", "sigma_tilde_22", "sigma_11", "sigma_22", "sigma_33")
    for name, v in zip(names, (st11, st22, s11, s22, s33)):
        bad = ~(np.asarray(v) > 0)
        if np.any(bad):
            rr = np.asarray(r)[bad] if np.ndim(r) else r
            raise CovarianceError(f"{name} is not positive at r = {np.ravel(rr)[0]!r}")
    tiny = 1e-12 * np.abs(s11 * s33)
    if np.any(disc < -tiny):
        raise CovarianceError("sigma_11 sigma_33 - sigma_13^2 is negative")
    return np.sqrt(np.maximum(disc, 0.0))


def _conditioned_by_qr(model, radii, tol=1e-15):
    """Conditioned Hessian entries from a QR factorisation of mode vectors.

    At theta = 0 the real parts of the coefficients drive (u_r, u_tt, u_rr)
    and the imaginary parts drive (u_t, u_rt). Each conditioned entry is an
    inner product of residual vectors, which the R factor delivers without
    the subtractive cancellation of the series formulas.
    """
    L = truncation_order(float(np.max(radii)), model.effective_s, tol, shift=2)
    j, jp, jpp = bessel_table(radii, L)
    l = np.arange(1, L + 1, dtype=float)[:, None]
    w = 2.0 * model.sigma(l)
    x_block = np.stack([w * jp[1:], -w * l * l * j[1:], w * jpp[1:]], axis=-1)
    y_block = np.stack([-w * l * j[1:], -w * l * jp[1:]], axis=-1)
    rx = np.linalg.qr(np.moveaxis(x_block, 1, 0), mode="r")
    ry = np.linalg.qr(np.moveaxis(y_block, 1, 0), mode="r")
    s11 = rx[:, 1, 1] ** 2
    s13 = rx[:, 1, 1] * rx[:, 1, 2]
    s33 = rx[:, 1, 2] ** 2 + rx[:, 2, 2] ** 2
    s22 = ry[:, 1, 1] ** 2
    disc = (rx[:, 1, 1] * rx[:, 2, 2]) ** 2
    return s11, s13, s22, s33, disc


def _direct_arrays(model, radii, tol=1e-15, rel_floor=1e-6):
    model = as_model(model)
    radii = np.asarray(radii, dtype=float)
    S = {k: kind_sums_direct(model.shifted(k), radii, tol=tol) for k in (0, 1, 2)}
    st11, st22, s11, s13, s22, s33, disc = _assemble(S, np.sqrt)
    # where the conditioning cancels most digits, redo those radii by QR
    with np.errstate(divide="ignore", invalid="ignore"):
        weak = ~((s11 > rel_floor * 4 * S[2]["JJ"]) & (s22 > rel_floor * 4 * S[1]["JpJp"])
                 & (s33 > rel_floor * 4 * S[0]["JppJpp"]) & (disc > rel_floor * s11 * s33))
    if weak.any():
        q = _conditioned_by_qr(model, radii[weak], tol)
        for arr, v in zip((s11, s13, s22, s33, disc), q):
            arr[weak] = v
    cross = _check_direct(radii, st11, st22, s11, s13, s22, s33, disc)
    return st11, st22, s11, s13, s22, s33, cross


def _leading_sums(s, phase):
    return {k: {kind: kind_leading(kind, s - k, phase)
                for kind in ("JJ", "JJp", "JpJp", "JJpp", "JpJpp", "JppJpp")}
            for k in (0, 1, 2)}


def leading_covariance(s, phase):
    """Leading terms (Leading objects) of all covariance entries."""
    st11, st22, s11, s13, s22, s33, disc = _assemble(_leading_sums(s, phase), None)
    return {"sigma_tilde_11": st11, "sigma_tilde_22": st22, "sigma_11": s11,
            "sigma_13": s13, "sigma_22": s22, "sigma_33": s33, "cross_root": disc.sqrt()}


def covariance_state(model, r, method="direct"):
    model = as_model(model)
    if not (math.isfinite(r) and r > 0):
        raise ValueError("radius must be finite and positive")
    if method == "direct":
        vals = [float(v[0]) for v in _direct_arrays(model, np.array([float(r)]))]
    elif method == "asymptotic":
        if not model.is_default:
            raise ValueError("asymptotics only exist for the pure power weight")
        lead = leading_covariance(model.s, float(r))
        vals = [float(lead[k].at(r)) for k in ("sigma_tilde_11", "sigma_tilde_22", "sigma_11",
                                               "sigma_13", "sigma_22", "sigma_33", "cross_root")]
    else:
        raise ValueError(f"unknown method {method!r}")
    st11, st22, s11, s13, s22, s33, cross = vals
    return CovarianceState(float(r), st11, st22, s11, s13, s22, s33, cross, st11 * st22)


# --- integrand and expectation --------------------------------------------

def integrand_from_entries(st11, st22, s13, s22, cross):
    e = abs_gaussian_reduce(s13, -np.asarray(s22), 0.5 * np.asarray(cross))
    return e / (2.0 * math.pi * np.sqrt(st11 * st22))


def kac_rice_integrand(model, r, method="direct"):
    c = covariance_state(model, r, method)
    return float(integrand_from_entries(c.sigma_tilde_11, c.sigma_tilde_22, c.sigma_13,
                                        c.sigma_22, c.cross_root))


def integrand_direct(model, radii):
    radii = np.asarray(radii, dtype=float).ravel()
    out = np.empty(radii.size)
    step = 4096
    for i in range(0, radii.size, step):
        st11, st22, _, s13, s22, _, cross = _direct_arrays(model, radii[i: i + step])
        out[i: i + step] = integrand_from_entries(st11, st22, s13, s22, cross)
    return out


def expected_critical_points(model, R, r_min=math.pi, rtol=1e-6, panel_width=math.pi / 4):
    """E N(grad u, R) restricted to the annulus r_min < r < R.

    Panels whose 12- and 20-point Gauss-Legendre estimates disagree are
    bisected until the total is good to rtol; otherwise a QuadratureWarning
    is issued with the best estimate.
    """
    model = as_model(model)
    if not (0 < r_min < R and math.isfinite(R)):
        raise ValueError("need 0 < r_min < R")
    f = lambda r: 2.0 * math.pi * integrand_direct(model, r)
    val, ok = adaptive_gauss(f, r_min, R, panel_width, rtol)
    if not ok:
        warnings.warn(f"expectation quadrature did not reach rtol {rtol:g}", QuadratureWarning)
    return val


# --- regime constants -----------------------------------------------------

def regime_of(s):
    for edge, name in ((0.5, "half"), (1.5, "three_half"), (2.5, "five_half")):
        if abs(s - edge) <= HALF_EPS:
            return name
    if s < 0.5:
        return "sub_half"
    if s < 1.5:
        return "half_to_three_half"
    if s < 2.5:
        return "three_half_to_five_half"
    return "above_five_half"


def exponent_of(s):
    reg = regime_of(s)
    if reg in ("sub_half", "half", "half_to_three_half", "three_half"):
        return 2.0
    if reg == "three_half_to_five_half":
        return 3.5 - s
    return 1.0


def log_power_of(s):
    return {"three_half": -0.5, "five_half": 0.5}.get(regime_of(s), 0.0)


def kappa_sub_half(s):
    a = math.sqrt((1 - 2 * s) / (8 - 4 * s))
    e = float(abs_gaussian_reduce(a, -a, 0.5))
    return e / (2.0 * math.sqrt(2.0 - s))


def _kappa_mid(s):
    # 3/2 < s < 5/2
    p = 4.0 ** s
    pref = (2.0 ** (2 * s + 0.5) / ((7 - 2 * s) * math.pi ** 1.5)
            * gamma_ratio([], [3 - s])
            * math.sqrt((p - 1) * gamma_ratio([5 - 2 * s], []) / zeta(2 * s - 2)))
    P = lambda r: 1.0 / (((p - 2) * np.sin(2 * r) + p) * np.sqrt(p - (p - 8) * np.sin(2 * r)))
    return pref * periodic_trapezoid(P, math.pi)


def _kappa_five_half():
    P = lambda r: 1.0 / ((16 + 15 * np.sin(2 * r)) * np.sqrt(4 - 3 * np.sin(2 * r)))
    return 4.0 / math.pi ** 2 * math.sqrt(31.0 / zeta(3.0)) * periodic_trapezoid(P, math.pi)


def above_five_half_density(s, phase):
    """Coefficient of the r^0 Kac-Rice density for s > 5/2 as a function of phase."""
    x = np.sin(2 * np.asarray(phase, dtype=float))
    c2 = 1.0 - x * x
    Z = [zeta(2 * s - 2 * k) / math.pi for k in range(3)]
    b = [2.0 ** (1 + 2 * k - 2 * s) - 1 for k in range(3)]
    st11 = 4 * Z[1] * (b[1] * x + 1)
    st22 = 4 * Z[0] * (1 - b[0] * x)
    s11 = 4 * Z[2] * (b[2] * x + 1) - 4 * Z[1] ** 2 * b[1] ** 2 * c2 / (Z[0] * (1 - b[0] * x))
    s22 = 4 * Z[1] * (1 - b[1] ** 2) / (1 + b[1] * x)
    s13 = 4 * Z[1] * ((b[1] - b[0]) * x + 1 - b[0] * b[1]) / (1 - b[0] * x)
    s33 = 4 * Z[0] * (1 - b[0] ** 2) / (1 - b[0] * x)
    cross = np.sqrt(np.maximum(s11 * s33 - s13 ** 2, 0.0))
    return integrand_from_entries(st11, st22, s13, s22, cross)


def kappa_constant(s):
    """Closed-form leading constant, exponent and log power for regularity s."""
    if not math.isfinite(s):
        raise ValueError("s must be finite")
    reg = regime_of(s)
    if reg == "sub_half":
        k = kappa_sub_half(s)
    elif reg == "half":
        k = math.sqrt(2.0 / 3.0) / math.pi
    elif reg == "half_to_three_half":
        k = math.sqrt((3 - 2 * s) / (4 - 2 * s)) / math.pi
    elif reg == "three_half":
        k = 1.0 / math.pi
    elif reg == "three_half_to_five_half":
        k = _kappa_mid(s)
    elif reg == "five_half":
        k = _kappa_five_half()
    else:
        k = 2.0 * periodic_trapezoid(lambda ph: above_five_half_density(s, ph), math.pi)
    return KappaResult(float(s), reg, float(k), exponent_of(s), log_power_of(s))


def leading_density(s, n_phase=2048):
    """Leading term of the Kac-Rice density from the generic term algebra.

    Returns (phases, coefficient array, power, log_power).
    """
    phase = np.arange(n_phase) * (math.pi / n_phase)
    lead = leading_covariance(s, phase)
    A, B, C = dominant(lead["sigma_13"], -lead["sigma_22"], lead["cross_root"] * 0.5)
    ref = next(t for t in (A, B, C) if not t.is_zero)
    coefs = [np.broadcast_to(t.coef, phase.shape) if not t.is_zero else np.zeros_like(phase)
             for t in (A, B, C)]
    sig = (lead["sigma_tilde_11"] * lead["sigma_tilde_22"]).sqrt()
    e = abs_gaussian_reduce(*coefs)
    coef = e / (2.0 * math.pi * np.broadcast_to(sig.coef, phase.shape))
    return phase, coef, ref.power - sig.power, ref.log_power - sig.log_power


def kappa_asymptotic(s, n_phase=2048):
    """The same constant obtained mechanically from the series leading terms."""
    phase, coef, a, b = leading_density(s, n_phase)
    integral = float(np.mean(coef)) * math.pi
    return KappaResult(float(s), regime_of(s), 2.0 / (a + 1.0) * integral, a + 1.0, b)


def periodic_integral(P, rtol=1e-12):
    return periodic_trapezoid(P, math.pi, rtol=rtol)


def periodic_average(P, a, b, R):
    """R^{a+1} (log R)^b / (pi (a+1)) times the integral of P over a period."""
    if a < 0 or (a == 0 and b < 0):
        raise ValueError("need a >= 0, and b >= 0 when a = 0")
    return R ** (a + 1) * math.log(R) ** b / (math.pi * (a + 1)) * periodic_integral(P)


def kappa_monotonicity_scan(grid):
    grid = [float(g) for g in grid]
    if any(g >= 0.5 for g in grid) or grid != sorted(grid):
        raise ValueError("grid must be sorted and below 1/2")
    return [(g, kappa_sub_half(g)) for g in grid]


def predicted_leading(s, R):
    k = kappa_constant(s)
    return k.kappa * R ** k.exponent * math.log(R) ** k.log_power
