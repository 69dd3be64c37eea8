"""Small quadrature helpers: tanh-sinh on [0, 1], Gauss-Legendre panels and
the trapezoid rule for periodic integrands."""
import math

import numpy as np

_TS_TMAX = 4.5  # nodes reach about 1e-61 from the ends


def tanh_sinh_nodes(h):
    """Nodes x in (0, 1), complements 1 - x, and weights for step h."""
    k = np.arange(-int(math.ceil(_TS_TMAX / h)), int(math.ceil(_TS_TMAX / h)) + 1)
    t = k * h
    u = 0.5 * math.pi * np.sinh(t)
    # x = 1 / (1 + exp(-2u)) written to keep both ends accurate
    x = 1.0 / (1.0 + np.exp(-2.0 * u))
    xc = 1.0 / (1.0 + np.exp(2.0 * u))
    w = h * 0.5 * math.pi * np.cosh(t) / (2.0 * np.cosh(u) ** 2)
    return x, xc, w


def tanh_sinh(f, rtol=1e-13, h0=0.25, max_halvings=6):
    """Integrate f over [0, 1]; f maps (x, 1-x) arrays to values.

    f may return a 2-D array (batch, nodes); the rule then integrates each
    row. Returns (value, converged).
    """
    prev = None
    h = h0
    for _ in range(max_halvings + 1):
        x, xc, w = tanh_sinh_nodes(h)
        val = np.asarray(f(x, xc)) @ w
        if prev is not None:
            err = np.max(np.abs(val - prev) / (np.abs(val) + 1e-300))
            if err < rtol:
                return val, True
        prev = val
        h *= 0.5
    return prev, False


def periodic_trapezoid(f, period, rtol=1e-12, n0=64, max_n=2 ** 16):
    """Integral of a smooth periodic f over one period by the trapezoid rule."""
    n = n0
    prev = None
    while n <= max_n:
        x = np.arange(n) * (period / n)
        val = float(np.mean(f(x)) * period)
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
            return val
        prev = val
        n *= 2
    return prev


def adaptive_gauss(f, a, b, panel_width, rtol=1e-6, max_depth=14, n_lo=12, n_hi=20):
    """Composite Gauss-Legendre with local bisection.

    Each panel is integrated with n_lo and n_hi nodes; panels whose two
    estimates differ by more than their share of rtol * |total| are split,
    level by level, so f is always called on whole batches of points.
    Returns (value, converged).
    """
    xl, wl = np.polynomial.legendre.leggauss(n_lo)
    xh, wh = np.polynomial.legendre.leggauss(n_hi)
    n0 = max(1, int(math.ceil((b - a) / panel_width)))
    edges = np.linspace(a, b, n0 + 1)
    lo_e, hi_e = edges[:-1], edges[1:]
    done_total = 0.0
    done_width = 0.0
    for _ in range(max_depth + 1):
        mid = 0.5 * (lo_e + hi_e)
        half = 0.5 * (hi_e - lo_e)
        pts = np.concatenate([(mid[:, None] + half[:, None] * xl).ravel(),
                              (mid[:, None] + half[:, None] * xh).ravel()])
        vals = np.asarray(f(pts))
        k = lo_e.size * n_lo
        est_lo = vals[:k].reshape(-1, n_lo) @ wl * half
        est_hi = vals[k:].reshape(-1, n_hi) @ wh * half
        total = done_total + est_hi.sum()
        share = rtol * abs(total) * (2 * half) / (b - a)
        ok = np.abs(est_hi - est_lo) <= share
        done_total += est_hi[ok].sum()
        done_width += (2 * half[ok]).sum()
        if ok.all():
            return float(done_total), True
        lo_e, hi_e = lo_e[~ok], hi_e[~ok]
        m = 0.5 * (lo_e + hi_e)
        lo_e, hi_e = np.concatenate([lo_e, m]), np.concatenate([m, hi_e])
    return float(total), False
