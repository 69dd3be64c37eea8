"""Integer-order Bessel functions J_l and their first two r-derivatives.

Values come from Miller's backward recurrence normalised with the
Neumann sum J_0^2 + 2 sum_{l>=1} J_l^2 = 1, vectorised over radii.
Derivatives follow from the recurrences, so J'' + J'/r + (1 - l^2/r^2) J
vanishes to rounding for every order.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln

_RESCALE = 1e100
_SEED_VALUE = 1e-30


@dataclass(frozen=True)
class BesselBlock:
    radius: float
    max_order: int
    j: np.ndarray
    jp: np.ndarray
    jpp: np.ndarray
    tail_bound: float  # bound on 2 * sum_{l > max_order} J_l(r)^2

    def neumann_sum(self):
        return self.j[0] ** 2 + 2.0 * np.sum(self.j[1:] ** 2)


def _start_order(top, rmax):
    big = max(top, rmax)
    return int(math.ceil(big + 30.0 + 3.0 * math.sqrt(big)))


def _miller(radii, top):
    """J_0..J_top at each positive radius, shape (top + 1, n)."""
    x = np.asarray(radii, dtype=float).ravel()
    start = _start_order(top, float(x.max()) if x.size else 0.0)
    vals = np.zeros((start + 2, x.size))
    vals[start] = _SEED_VALUE
    two_over_x = 2.0 / x
    for k in range(start, 0, -1):
        row = (k * two_over_x) * vals[k] - vals[k + 1]
        vals[k - 1] = row
        # growth over 4 steps stays far below the overflow margin
        if k % 4 == 0 or k == 1:
            big = np.abs(row) > _RESCALE
            if big.any():
                cols = np.nonzero(big)[0]
                vals[k - 1:, cols] /= _RESCALE
    norm = vals[0] ** 2 + 2.0 * np.sum(vals[1:] ** 2, axis=0)
    return vals[: top + 1] / np.sqrt(norm)


def bessel_table(radii, max_order):
    """Return (j, jp, jpp), each of shape (max_order + 1, len(radii))."""
    x = np.asarray(radii, dtype=float).ravel()
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("radii must be finite and positive")
    if max_order < 2:
        raise ValueError("max_order must be at least 2")
    L = int(max_order)
    ext = _miller(x, L + 2)
    # extended index e = l + 2 so that J_{-1}, J_{-2} sit at e = 1, 0
    full = np.empty((L + 5, x.size))
    full[2:] = ext
    full[1] = -ext[1]
    full[0] = ext[2]
    j = full[2: L + 3]
    jp = 0.5 * (full[1: L + 2] - full[3: L + 4])
    jpp = 0.25 * (full[0: L + 1] + full[4: L + 5] - 2.0 * j)
    return j.copy(), jp, jpp


def log_decay_bound(r, l):
    """log of r^l / (2^l l!), the bound |J_l(r)| <= (r/2)^l / l!."""
    l = np.asarray(l, dtype=float)
    return l * math.log(0.5 * r) - gammaln(l + 1.0)


def tail_bound(r, s, L, shift=0):
    """Bound on sum_{l>L} l^{-2s} b_{l-shift}^2 with b_k = (r/2)^k / k!.

    Terms are summed explicitly for a stretch past L and the remainder is
    closed with a geometric bound once the term ratio is below 1/2.
    """
    r = float(r)
    l = np.arange(L + 1, L + 1 + max(64, int(r) + 64), dtype=float)
    k = np.maximum(l - shift, 0.0)
    logt = -2.0 * s * np.log(l) + 2.0 * log_decay_bound(r, k)
    m = logt.max()
    total = math.exp(m) * float(np.sum(np.exp(logt - m)))
    # ratio of consecutive terms beyond the stretch
    lend = l[-1]
    q = (r / (2.0 * (lend + 1.0 - shift))) ** 2 * ((lend + 1.0) / lend) ** (2.0 * abs(s))
    if q < 0.5:
        total += math.exp(logt[-1]) * q / (1.0 - q)
    else:
        total = math.inf
    return total


def truncation_order(r, s, tol, shift=0):
    """Smallest L >= ceil(r) + 16 whose weighted tail is below tol."""
    if not (r > 0 and math.isfinite(r)):
        raise ValueError("radius must be finite and positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    L = int(math.ceil(r)) + 16
    while tail_bound(r, s, L, shift) >= tol:
        L += max(1, L // 16)
    # step back to the smallest admissible order
    while L > int(math.ceil(r)) + 16 and tail_bound(r, s, L - 1, shift) < tol:
        L -= 1
    return L


def bessel_block(r, max_order):
    if not (isinstance(r, (int, float, np.floating)) and math.isfinite(r) and r > 0):
        raise ValueError("radius must be finite and positive")
    if max_order < 2:
        raise ValueError("max_order must be at least 2")
    j, jp, jpp = bessel_table([r], max_order)
    tb = 2.0 * tail_bound(r, 0.0, max_order)
    return BesselBlock(float(r), int(max_order), j[:, 0], jp[:, 0], jpp[:, 0], tb)


def addition_sums(r, tol=1e-16):
    """Neumann sums with eps_0 = 1, eps_l = 2, that Graf's addition formula fixes.

    Returns a dict with the computed sums and their exact values:
    sum eps J^2 = 1, sum eps J'^2 = 1/2, sum eps l^2 J J' = r/2,
    sum eps l^4 J^2 = r^2 (4 + 3 r^2) / 8.
    """
    L = truncation_order(r, -2.0, tol * max(1.0, r ** 4), shift=1)
    j, jp, _ = bessel_table([r], L)
    j, jp = j[:, 0], jp[:, 0]
    l = np.arange(L + 1, dtype=float)
    eps = np.where(l == 0, 1.0, 2.0)
    got = {
        "J2": float(np.sum(eps * j * j)),
        "Jp2": float(np.sum(eps * jp * jp)),
        "l2JJp": float(np.sum(eps * l * l * j * jp)),
        "l4J2": float(np.sum(eps * l ** 4 * j * j)),
    }
    exact = {"J2": 1.0, "Jp2": 0.5, "l2JJp": 0.5 * r, "l4J2": r * r * (4 + 3 * r * r) / 8}
    return got, exact
