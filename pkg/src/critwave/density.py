"""The random density f on the circle and its regularity diagnostics.

f(phi) = (1/2pi) sum_{l != 0} i^l a_l sigma_l e^{i l phi}. With the pairing
a_{-l} = (-1)^l conj(a_l) this is (1/pi) sum_{l>=1} sigma_l i^l Re(a_l e^{i l phi}),
so even modes build Re f and odd modes build Im f.
"""
from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy.optimize import brentq

from .series import RegularityModel


class NonvanishingWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class DensityRealization:
    model: RegularityModel
    coeffs: np.ndarray
    l_max: int

    @classmethod
    def from_sample(cls, sample):
        return cls(sample.model, sample.coeffs, sample.l_max)

    def _mode_weights(self):
        l = np.arange(1, self.l_max + 1)
        return l, self.model.sigma(l) * np.array([1, 1j, -1, -1j])[l % 4]


@dataclass(frozen=True)
class DensityCriticalPoints:
    count: int
    locations: np.ndarray
    min_abs_f: float
    degenerate: np.ndarray  # per location, low |(|f|^2)''|
    vanishing: bool

    def __iter__(self):
        # unpacks as (count, locations, min_abs_f)
        return iter((self.count, self.locations, self.min_abs_f))


@dataclass(frozen=True)
class DyadicProfile:
    blocks: list
    slope_fit: float


def density_eval(d, phi, order=0, chunk=4096):
    """f^{(order)}(phi), vectorised over phi."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    phi = np.asarray(phi, dtype=float)
    flat = phi.ravel()
    l, w = d._mode_weights()
    a = d.coeffs * (1j * l) ** order
    abar = np.conj(d.coeffs) * (-1j * l) ** order
    out = np.empty(flat.size, dtype=complex)
    for i in range(0, flat.size, chunk):
        e = np.exp(1j * np.outer(flat[i: i + chunk], l))
        # Re-part derivative: ((il)^k a e^{il phi} + (-il)^k conj(a) e^{-il phi}) / 2
        re_part = 0.5 * (e @ (w * a) + np.conj(e) @ (w * abar))
        out[i: i + chunk] = re_part / math.pi
    return out.reshape(phi.shape) if phi.ndim else complex(out[0])


def _modulus_slope(d, phi):
    """(|f|^2)' / 2 = Re(conj(f) f')."""
    f = density_eval(d, phi, 0)
    fp = density_eval(d, phi, 1)
    return np.real(np.conj(f) * fp)


def count_density_critical_points(d, oversample=64, degeneracy_tol=1e-8):
    n = max(1024, oversample * d.l_max)
    grid = 2 * math.pi * np.arange(n) / n
    f = density_eval(d, grid, 0)
    fp = density_eval(d, grid, 1)
    h = np.real(np.conj(f) * fp)
    abs_f = np.abs(f)
    nxt = np.roll(h, -1)
    brackets = np.nonzero((h == 0) | ((h < 0) != (nxt < 0)) & (nxt != 0))[0]
    scalar = lambda x: float(_modulus_slope(d, np.array([x]))[0])
    roots = []
    for k in brackets:
        a, b = grid[k], grid[k] + 2 * math.pi / n
        if h[k] == 0:
            roots.append(a)
            continue
        x = brentq(scalar, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        roots.append(x)
    roots = np.mod(np.array(roots), 2 * math.pi)
    # one Newton polish step on (|f|^2)'/2 and the degeneracy check
    f0 = density_eval(d, roots, 0)
    f1 = density_eval(d, roots, 1)
    f2 = density_eval(d, roots, 2)
    hval = np.real(np.conj(f0) * f1)
    hder = np.abs(f1) ** 2 + np.real(np.conj(f0) * f2)
    # circle-wide scale: the local one shrinks together with hder near a merger
    scale = float(np.mean(np.abs(fp) ** 2 + abs_f * np.abs(density_eval(d, grid, 2))))
    ok = np.abs(hder) > 0
    roots[ok] = np.mod(roots[ok] - hval[ok] / hder[ok], 2 * math.pi)
    degenerate = np.abs(hder) <= degeneracy_tol * scale
    min_abs = float(min(abs_f.min(), np.abs(f0).min() if f0.size else np.inf))
    vanishing = min_abs < 1e-9
    if vanishing:
        warnings.warn("density comes within 1e-9 of zero; the linear law needs f != 0",
                      NonvanishingWarning)
    order = np.argsort(roots)
    return DensityCriticalPoints(int(roots.size), roots[order], min_abs, degenerate[order], vanishing)


def block_contributions(d, n_blocks, sigma=None):
    """sum over 2^{N-1} <= l < 2^N of |a_l|^2 sigma_l^2 l^{2 sigma}, N = 1..n_blocks."""
    if d.l_max < 2 ** n_blocks - 1:
        raise ValueError(f"dyadic profile with {n_blocks} blocks needs l_max >= {2 ** n_blocks - 1}")
    l = np.arange(1, d.l_max + 1)
    e = np.abs(d.coeffs) ** 2 * d.model.sigma(l) ** 2
    if sigma is not None:
        e = e * l.astype(float) ** (2.0 * sigma)
    return np.array([e[2 ** (N - 1) - 1: 2 ** N - 1].sum() for N in range(1, n_blocks + 1)])


def block_slope(contrib, min_block=6):
    """Least-squares slope of log2(contribution) against the block index."""
    N = np.arange(1, len(contrib) + 1)
    keep = N >= min(min_block, len(contrib) - 2)
    return float(np.polyfit(N[keep], np.log2(contrib[keep]), 1)[0])


def dyadic_profile(d, n_blocks, sigma=None, min_block=6):
    """Block energies plus the fitted growth exponent at sigma (default s - 1/2)."""
    if n_blocks < 5:
        raise ValueError("need at least 5 dyadic blocks")
    energy = block_contributions(d, n_blocks)
    if sigma is None:
        sigma = d.model.s - 0.5
    slope = block_slope(block_contributions(d, n_blocks, sigma), min_block)
    return DyadicProfile([(N, float(v)) for N, v in zip(range(1, n_blocks + 1), energy)], slope)


def pooled_slope(realizations, n_blocks, sigma, min_block=6):
    """Growth exponent after summing block contributions over samples."""
    total = sum(block_contributions(d, n_blocks, sigma) for d in realizations)
    return block_slope(total, min_block)
