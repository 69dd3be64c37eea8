"""Gaussian random monochromatic waves and their critical points.

u(r, theta) = sum_{l != 0} a_l sigma_l e^{i l theta} J_l(r) with
a_{-l} = (-1)^l conj(a_l), which pairs into 2 sum_{l>=1} Re(c_l e^{i l theta}) J_l(r)
for c_l = sigma_l a_l. Derivatives in (theta, r) are exact in the truncated
model; near the origin a Cartesian ladder of W_l = J_l e^{i l theta} is used.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import math
import time

import numpy as np
from scipy.spatial import cKDTree

from .bessel import bessel_table
from .density import DensityRealization, count_density_critical_points, density_eval
from .rng import gaussian_coefficients, sample_seed
from .series import as_model

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class WaveSample:
    model: object
    seed: int
    l_max: int
    coeffs: np.ndarray  # a_1..a_{l_max}

    @classmethod
    def from_coefficients(cls, model, coeffs, seed=-1):
        coeffs = np.asarray(coeffs, dtype=complex)
        return cls(as_model(model), seed, coeffs.size, coeffs)

    @property
    def amplitudes(self):
        """c_l = sigma_l a_l for l = 1..l_max."""
        return self.model.sigma(np.arange(1, self.l_max + 1)) * self.coeffs

    def two_sided(self):
        """(orders, coefficients) for l = -l_max..l_max with a_0 = 0."""
        l = np.arange(1, self.l_max + 1)
        neg = ((-1.0) ** l * np.conj(self.coeffs))[::-1]
        return (np.arange(-self.l_max, self.l_max + 1),
                np.concatenate([neg, [0.0], self.coeffs]))

    def density(self):
        return DensityRealization.from_sample(self)


@dataclass(frozen=True)
class CriticalPoint:
    r: float
    theta: float
    kind: str  # saddle, extremum or degenerate_flag
    hessian_det: float  # Cartesian Hessian determinant
    residual: float


@dataclass(frozen=True)
class CountRecord:
    seed: int
    s: float
    R: float
    l_max: int
    n_critical: int
    n_saddle: int
    n_extremum: int
    wall_time: float


def sample_wave(model, seed, l_max):
    if l_max < 8:
        raise ValueError("l_max must be at least 8")
    return WaveSample(as_model(model), int(seed), int(l_max), gaussian_coefficients(seed, int(l_max)))


def min_l_max(R, margin=0.5):
    return int(math.ceil((1.0 + margin) * R)) + 32


# --- evaluation -----------------------------------------------------------

def polar_fields(sample, r, theta):
    """u, u_t, u_r, u_tt, u_rt, u_rr at matching 1-D arrays r > 0, theta."""
    r = np.asarray(r, dtype=float).ravel()
    theta = np.asarray(theta, dtype=float).ravel()
    L = sample.l_max
    j, jp, jpp = bessel_table(r, L)
    j, jp, jpp = j[1:], jp[1:], jpp[1:]
    l = np.arange(1, L + 1, dtype=float)
    z = sample.amplitudes[None, :] * np.exp(1j * np.outer(theta, l))
    zr, zi = z.real, z.imag
    u = 2.0 * np.einsum("ln,nl->n", j, zr)
    ut = -2.0 * np.einsum("ln,nl->n", j, zi * l)
    ur = 2.0 * np.einsum("ln,nl->n", jp, zr)
    utt = -2.0 * np.einsum("ln,nl->n", j, zr * l * l)
    urt = -2.0 * np.einsum("ln,nl->n", jp, zi * l)
    urr = 2.0 * np.einsum("ln,nl->n", jpp, zr)
    return u, ut, ur, utt, urt, urr


def evaluate(sample, r, theta):
    """(u, du, d2u) with du = (u_theta, u_r) and d2u = [[u_tt, u_rt], [u_rt, u_rr]]."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(~(r_arr > 0)):
        raise ValueError("evaluate needs r > 0")
    th = np.broadcast_to(np.asarray(theta, dtype=float), r_arr.shape)
    u, ut, ur, utt, urt, urr = polar_fields(sample, r_arr, th)
    shape = r_arr.shape
    du = np.stack([ut, ur], axis=-1).reshape(shape + (2,))
    d2u = np.stack([utt, urt, urt, urr], axis=-1).reshape(shape + (2, 2))
    if not shape:
        return float(u[0]), du, d2u
    return u.reshape(shape), du, d2u


def cartesian_fields(sample, x, y):
    """u, u_x, u_y, u_xx, u_xy, u_yy at Cartesian points (origin allowed)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    r = np.hypot(x, y)
    th = np.arctan2(y, x)
    L = sample.l_max
    at0 = r == 0
    j, _, _ = bessel_table(np.where(at0, 1.0, r), L + 2)
    j[:, at0] = 0.0
    j[0, at0] = 1.0
    k = np.arange(-2, L + 3)
    sign = np.where((k < 0) & (k % 2 == 1), -1.0, 1.0)
    # W[k + 2] = J_k e^{i k theta}, k = -2..L+2
    W = (sign[:, None] * j[np.abs(k)]) * np.exp(1j * np.outer(k, th))
    c = sample.amplitudes[:, None]
    idx = np.arange(1, L + 1) + 2

    def pair(v):
        return 2.0 * np.real(np.sum(c * v, axis=0))

    u = pair(W[idx])
    ux = pair(0.5 * (W[idx - 1] - W[idx + 1]))
    uy = pair(0.5j * (W[idx - 1] + W[idx + 1]))
    uxx = pair(0.25 * (W[idx - 2] - 2 * W[idx] + W[idx + 2]))
    uyy = pair(-0.25 * (W[idx - 2] + 2 * W[idx] + W[idx + 2]))
    uxy = pair(0.25j * (W[idx - 2] - W[idx + 2]))
    return u, ux, uy, uxx, uxy, uyy


# --- critical points ------------------------------------------------------

def _polar_residual(r, ut, ur):
    return np.sqrt((ut / r) ** 2 + ur ** 2)


def _damped_step(resid_at, base, step, cur, max_halvings, per_call=7):
    """First step length 2^-k (k <= max_halvings) that lowers the residual.

    resid_at(points) returns residuals at an (m, 2) array of trial points;
    several step lengths are tried per call. Returns the accepted points and
    a mask of seeds for which no step length helped.
    """
    n = base.shape[0]
    out = base.copy()
    pending = np.ones(n, dtype=bool)
    # the full step alone first, since it almost always succeeds
    starts = [0] + list(range(1, max_halvings + 1, per_call))
    for k0, k1 in zip(starts, starts[1:] + [max_halvings + 1]):
        p = np.nonzero(pending)[0]
        if p.size == 0:
            break
        ks = np.arange(k0, k1)
        lam = 0.5 ** ks
        trial = base[p, None, :] + lam[None, :, None] * step[p, None, :]
        res = resid_at(trial.reshape(-1, 2)).reshape(p.size, ks.size)
        better = res < cur[p, None]
        hit = better.any(axis=1)
        first = np.argmax(better, axis=1)
        acc = p[hit]
        out[acc] = trial[hit, first[hit]]
        pending[acc] = False
    return out, pending


def _took_full_step(base, new, step):
    return np.all(np.isclose(new, base + step, rtol=0, atol=1e-15 + 1e-12 * np.abs(base)), axis=1)


def _newton_polar(sample, r, th, tol, r_floor, r_ceil, max_iter=50, max_halvings=20,
                  max_drift=1.0, max_damped=10):
    pts = np.column_stack([r, th]).astype(float)
    start = pts.copy()
    damped = np.zeros(r.size, dtype=int)
    res = np.full(r.size, np.inf)
    active = np.ones(r.size, dtype=bool)

    def resid_at(q):
        out = np.full(q.shape[0], np.inf)
        ok = (q[:, 0] > r_floor) & (q[:, 0] < r_ceil)
        if ok.any():
            _, ut, ur, *_ = polar_fields(sample, q[ok, 0], q[ok, 1])
            out[ok] = _polar_residual(q[ok, 0], ut, ur)
        return out

    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        _, ut, ur, utt, urt, urr = polar_fields(sample, pts[idx, 0], pts[idx, 1])
        cur = _polar_residual(pts[idx, 0], ut, ur)
        res[idx] = cur
        done = cur < tol
        active[idx[done]] = False
        keep = ~done
        idx, ut, ur, utt, urt, urr, cur = (a[keep] for a in (idx, ut, ur, utt, urt, urr, cur))
        if idx.size == 0:
            break
        det = utt * urr - urt * urt
        with np.errstate(divide="ignore", invalid="ignore"):
            dth = -(urr * ut - urt * ur) / det
            dr = -(utt * ur - urt * ut) / det
        bad = ~np.isfinite(dth) | ~np.isfinite(dr)
        active[idx[bad]] = False
        idx, dth, dr, cur = idx[~bad], dth[~bad], dr[~bad], cur[~bad]
        # keep Newton local: at most half a unit per step
        size = np.hypot(pts[idx, 0] * dth, dr)
        shrink = np.minimum(1.0, 0.5 / np.maximum(size, 1e-300))
        step = np.column_stack([dth * shrink, dr * shrink])[:, ::-1]
        new, stuck = _damped_step(resid_at, pts[idx], step, cur, max_halvings)
        full = _took_full_step(pts[idx], new, step)
        damped[idx] = np.where(full, 0, damped[idx] + 1)
        pts[idx] = new
        active[idx[stuck]] = False
        # Newton near a true root takes full steps; a long run of damped
        # steps means a nonzero minimum of |Du|
        active[idx[damped[idx] >= max_damped]] = False
        # a seed that wanders off is chasing a root owned by another cell
        drift = np.hypot(pts[idx, 0] - start[idx, 0],
                         start[idx, 0] * _angle_gap(pts[idx, 1], start[idx, 1]))
        active[idx[drift > max_drift]] = False
    return pts[:, 0], np.mod(pts[:, 1], TWO_PI), res


def _newton_cartesian(sample, x, y, tol, max_iter=50, max_halvings=20):
    pts = np.column_stack([x, y]).astype(float)
    res = np.full(x.size, np.inf)
    active = np.ones(x.size, dtype=bool)

    def resid_at(q):
        _, ux, uy, *_ = cartesian_fields(sample, q[:, 0], q[:, 1])
        return np.hypot(ux, uy)

    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        _, ux, uy, uxx, uxy, uyy = cartesian_fields(sample, pts[idx, 0], pts[idx, 1])
        cur = np.hypot(ux, uy)
        res[idx] = cur
        done = cur < tol
        active[idx[done]] = False
        keep = ~done
        idx, ux, uy, uxx, uxy, uyy, cur = (a[keep] for a in (idx, ux, uy, uxx, uxy, uyy, cur))
        if idx.size == 0:
            break
        det = uxx * uyy - uxy * uxy
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = -(uyy * ux - uxy * uy) / det
            dy = -(uxx * uy - uxy * ux) / det
        bad = ~np.isfinite(dx) | ~np.isfinite(dy)
        active[idx[bad]] = False
        idx, dx, dy, cur = idx[~bad], dx[~bad], dy[~bad], cur[~bad]
        size = np.hypot(dx, dy)
        shrink = np.minimum(1.0, 0.5 / np.maximum(size, 1e-300))
        step = np.column_stack([dx * shrink, dy * shrink])
        new, stuck = _damped_step(resid_at, pts[idx], step, cur, max_halvings)
        pts[idx] = new
        active[idx[stuck]] = False
    return pts[:, 0], pts[:, 1], res


def _grid_gradient(sample, radii, n_theta):
    """u_theta and u_r on the polar grid radii x (2 pi k / n_theta), via inverse real FFT."""
    L = sample.l_max
    j, jp, _ = bessel_table(radii, L)
    c = sample.amplitudes
    l = np.arange(1, L + 1)
    half = n_theta // 2 + 1
    spec_t = np.zeros((radii.size, half), dtype=complex)
    spec_r = np.zeros((radii.size, half), dtype=complex)
    # 2 Re sum_l X_l e^{i l theta_k} = n * irfft(X)[k] for 1 <= l < n/2
    spec_t[:, 1: L + 1] = (1j * l * c)[None, :] * j[1:].T
    spec_r[:, 1: L + 1] = c[None, :] * jp[1:].T
    ut = np.fft.irfft(spec_t, n_theta, axis=1) * n_theta
    ur = np.fft.irfft(spec_r, n_theta, axis=1) * n_theta
    return ut, ur


def _straddles(F):
    """Cells [i, i+1] x [k, k+1 (cyclic)] over which F takes both signs."""
    a, b = F[:-1], F[1:]
    a2, b2 = np.roll(a, -1, axis=1), np.roll(b, -1, axis=1)
    lo = np.minimum(np.minimum(a, b), np.minimum(a2, b2))
    hi = np.maximum(np.maximum(a, b), np.maximum(a2, b2))
    return (lo <= 0) & (hi >= 0)


def _dedupe(x, y, radius):
    if x.size == 0:
        return np.zeros(0, dtype=int)
    tree = cKDTree(np.column_stack([x, y]))
    keep = np.ones(x.size, dtype=bool)
    for i, j in sorted(tree.query_pairs(radius)):
        if keep[i] and keep[j]:
            keep[j] = False
    return np.nonzero(keep)[0]


def _classify(det, scale, tol):
    if abs(det) < tol * scale:
        return "degenerate_flag"
    return "saddle" if det < 0 else "extremum"


def find_critical_points(sample, R, grid_density=8.0, newton_tol=1e-10, r_min=0.5,
                         dedupe_radius=1e-4, degeneracy_tol=1e-8, coarse_threshold=1e-2):
    """Critical points of u in the closed disk of radius R.

    Newton is seeded from every cell of a polar grid on [r_min, R] where both
    components of (u_theta, u_r) change sign, or where both are tiny at a
    corner compared with their rms on that circle. The disk
    r < r_min is covered by a Cartesian grid with Cartesian Newton.
    """
    if grid_density < 4:
        raise ValueError("grid_density must be at least 4 cells per unit length")
    if r_min < 0.1 or not r_min < R:
        raise ValueError("need 0.1 <= r_min < R")
    if not np.any(sample.coeffs != 0):
        raise ValueError("identically zero sample: every point is critical")
    h = 1.0 / grid_density
    n_r = int(math.ceil((R - r_min) / h)) + 1
    radii = r_min + h * np.arange(n_r + 1)
    n_theta = max(2 * sample.l_max + 4, int(math.ceil(TWO_PI * radii[-1] * grid_density)))
    n_theta = 1 << int(math.ceil(math.log2(n_theta)))
    ut, ur = _grid_gradient(sample, radii, n_theta)
    cells = _straddles(ut) & _straddles(ur)
    # both components tiny compared with their rms on the same circle
    small = ((np.abs(ut) < coarse_threshold * np.sqrt(np.mean(ut ** 2, axis=1, keepdims=True)))
             & (np.abs(ur) < coarse_threshold * np.sqrt(np.mean(ur ** 2, axis=1, keepdims=True))))
    cells |= small[:-1] | small[1:]
    ci, ck = np.nonzero(cells)
    del ut, ur, small
    seeds_r = radii[ci] + 0.5 * h
    seeds_t = (ck + 0.5) * (TWO_PI / n_theta)
    pr, pt, pres = _newton_polar(sample, seeds_r, seeds_t, newton_tol, 0.5 * r_min, R + 2.0)
    good = (pres < newton_tol) & (pr <= R) & (pr >= r_min)
    pr, pt, pres = pr[good], pt[good], pres[good]

    # Cartesian pass over the inner disk
    n_c = int(math.ceil(2 * r_min * grid_density)) + 1
    g = np.linspace(-r_min, r_min, n_c + 1)
    gx, gy = np.meshgrid(0.5 * (g[1:] + g[:-1]), 0.5 * (g[1:] + g[:-1]))
    cx, cy, cres = _newton_cartesian(sample, gx.ravel(), gy.ravel(), newton_tol)
    good = (cres < newton_tol) & (np.hypot(cx, cy) < r_min)
    cx, cy, cres = cx[good], cy[good], cres[good]

    xs = np.concatenate([pr * np.cos(pt), cx])
    ys = np.concatenate([pr * np.sin(pt), cy])
    res = np.concatenate([pres, cres])
    keep = _dedupe(xs, ys, dedupe_radius)
    xs, ys, res = xs[keep], ys[keep], res[keep]
    points = []
    if xs.size:
        _, _, _, hxx, hxy, hyy = cartesian_fields(sample, xs, ys)
        det = hxx * hyy - hxy * hxy
        scale = np.maximum(np.maximum(np.abs(hxx), np.abs(hyy)), np.abs(hxy)) ** 2
        for x, y, dt, sc, rs in zip(xs, ys, det, scale, res):
            points.append(CriticalPoint(float(math.hypot(x, y)), float(math.atan2(y, x) % TWO_PI),
                                        _classify(dt, sc, degeneracy_tol), float(dt), float(rs)))
    points.sort(key=lambda p: (p.r, p.theta))
    return points


def count_critical_points(sample, R, **kwargs):
    t0 = time.perf_counter()
    pts = find_critical_points(sample, R, **kwargs)
    n_saddle = sum(p.kind == "saddle" for p in pts)
    n_ext = sum(p.kind == "extremum" for p in pts)
    return CountRecord(sample.seed, sample.model.s, float(R), sample.l_max, len(pts),
                       n_saddle, n_ext, time.perf_counter() - t0)


# --- Monte Carlo ----------------------------------------------------------

def _count_job(args):
    s, seed, R, l_max, kwargs = args
    return count_critical_points(sample_wave(s, seed, l_max), R, **kwargs)


def simulate_counts(model, R, n_samples, master_seed=0, l_max=None, workers=1, **kwargs):
    """CountRecords for samples 0..n_samples-1, in sample order."""
    model = as_model(model)
    if not model.is_default:
        raise ValueError("simulation workers need the pure power weight")
    need = min_l_max(R)
    if l_max is None:
        l_max = need
    if l_max < need:
        raise ValueError(f"l_max = {l_max} is below ceil(1.5 R) + 32 = {need}")
    jobs = [(model.s, sample_seed(master_seed, i), R, l_max, kwargs) for i in range(n_samples)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_count_job, jobs))
    return [_count_job(j) for j in jobs]


def empirical_expectation(model, R, n_samples, master_seed=0, l_max=None, workers=1, **kwargs):
    recs = simulate_counts(model, R, n_samples, master_seed, l_max, workers, **kwargs)
    n = np.array([r.n_critical for r in recs], dtype=float)
    return float(n.mean()), float(n.std(ddof=1) / math.sqrt(n.size))


def exponent_fit(model, radii, n_samples, master_seed=0, workers=1, **kwargs):
    """(e_hat, kappa_hat, fit residual) from log mean count against log R."""
    radii = sorted(float(R) for R in radii)
    if len(radii) < 4 or radii[-1] < 4 * radii[0]:
        raise ValueError("need at least 4 radii spanning a factor of 4")
    means = [empirical_expectation(model, R, n_samples, master_seed, None, workers, **kwargs)[0]
             for R in radii]
    x, y = np.log(radii), np.log(means)
    (e_hat, logk), resid, *_ = np.polyfit(x, y, 1, full=True)
    return float(e_hat), float(math.exp(logk)), float(resid[0]) if len(resid) else 0.0


# --- high regularity: linear law and far field ----------------------------

@dataclass(frozen=True)
class LinearLaw:
    ratio: float
    n_f_crit: int
    n_critical: int
    flagged: bool  # density comes close to zero, so the law's hypothesis fails


def linear_law_per_sample(sample, R, **kwargs):
    if not sample.model.s > 5:
        raise ValueError("the linear law is checked for s > 5")
    if R < 40:
        raise ValueError("the linear law is checked for R >= 40")
    fc = count_density_critical_points(sample.density())
    n = len(find_critical_points(sample, R, **kwargs))
    ratio = math.pi * n / (R * fc.count) if fc.count else math.inf
    return LinearLaw(ratio, fc.count, n, fc.vanishing)


def far_field_predict(sample, n_range):
    """Predicted critical points (r*, theta*) = (pi n + pi/4 + arg f(phi*), phi*).

    phi* runs over the nondegenerate critical points of |f|; a vanishing
    density suppresses all predictions.
    """
    if not sample.model.s > 5:
        raise ValueError("far-field predictions are made for s > 5")
    fc = count_density_critical_points(sample.density())
    if fc.vanishing:
        return []
    n_lo, n_hi = n_range
    out = []
    for phi, deg in zip(fc.locations, fc.degenerate):
        if deg:
            continue
        arg = float(np.angle(density_eval(sample.density(), phi)))
        for n in range(n_lo, n_hi + 1):
            out.append((n, float(phi), math.pi * n + math.pi / 4 + arg))
    return out


def _angle_gap(a, b):
    d = np.mod(a - b, TWO_PI)
    return np.minimum(d, TWO_PI - d)


def match_far_field(sample, points, r_cut):
    """Pair every found critical point beyond r_cut with its nearest prediction.

    Distance is |d theta| + |d r|. Returns rows (n, phi_star, r_pred, r_found, distance).
    """
    far = [p for p in points if p.r > r_cut]
    if not far:
        return []
    r_hi = max(p.r for p in far)
    n_lo = int(math.floor((r_cut - math.pi) / math.pi)) - 1
    n_hi = int(math.ceil(r_hi / math.pi)) + 1
    preds = far_field_predict(sample, (n_lo, n_hi))
    if not preds:
        return [(None, None, None, p.r, math.inf) for p in far]
    pn = np.array([q[0] for q in preds])
    pphi = np.array([q[1] for q in preds])
    pr = np.array([q[2] for q in preds])
    rows = []
    for p in far:
        d = _angle_gap(p.theta, pphi) + np.abs(p.r - pr)
        k = int(np.argmin(d))
        rows.append((int(pn[k]), float(pphi[k]), float(pr[k]), p.r, float(d[k])))
    return rows
