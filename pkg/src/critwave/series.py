"""Weighted Neumann series sum_{l>=1} w_l J_{l+m}(r) J_{l+m'}(r).

Two evaluation routes are kept side by side: direct summation with a
rigorous tail bound, and the large-r leading asymptotics, which never
enumerate l. The six products of J, J', J'' that enter the Kac-Rice
covariance are available under the names JJ, JJp, JpJp, JJpp, JpJpp, JppJpp.
"""
from dataclasses import dataclass, field
import math
from typing import Callable, Optional

import numpy as np

from .asymptotics import Leading
from .bessel import bessel_table, tail_bound, truncation_order
from .special import gamma_ratio, zeta

HALF_EPS = 1e-12
KINDS = ("JJ", "JJp", "JpJp", "JJpp", "JpJpp", "JppJpp")
# (first factor derivative order, second factor derivative order)
_KIND_ORDERS = {"JJ": (0, 0), "JJp": (0, 1), "JpJp": (1, 1),
                "JJpp": (0, 2), "JpJpp": (1, 2), "JppJpp": (2, 2)}


@dataclass(frozen=True)
class RegularityModel:
    """Mode weights sigma_l = |l|^{-s}, or weight(|l|) when given.

    A custom weight is only usable by the direct routes; the tail bounds
    then assume weight(l)^2 <= l^{-2s}.
    """
    s: float
    weight: Optional[Callable] = field(default=None, compare=False)
    shift: int = 0  # extra factor |l|^shift on sigma, see shifted()

    def __post_init__(self):
        if not (isinstance(self.s, (int, float, np.floating)) and math.isfinite(self.s)):
            raise ValueError(f"regularity s must be a finite real, got {self.s!r}")

    @property
    def is_default(self):
        return self.weight is None

    @property
    def effective_s(self):
        return self.s - self.shift

    def sigma(self, l):
        l = np.abs(np.asarray(l, dtype=float))
        with np.errstate(divide="ignore"):
            if self.weight is None:
                out = np.where(l > 0, np.maximum(l, 1.0) ** (-(self.s - self.shift)), 0.0)
            else:
                out = np.where(l > 0, np.asarray(self.weight(np.maximum(l, 1.0)), dtype=float)
                               * l ** self.shift, 0.0)
        return out

    def shifted(self, k):
        """Model whose squared weights carry an extra l^{2k}."""
        return RegularityModel(self.s, self.weight, self.shift + k)


def as_model(s):
    return s if isinstance(s, RegularityModel) else RegularityModel(float(s))


@dataclass(frozen=True)
class SeriesSpec:
    model: RegularityModel
    m: int = 0
    m_prime: int = 0

    def __post_init__(self):
        for v in (self.m, self.m_prime):
            if int(v) != v or v < 0:
                raise ValueError("m and m_prime must be non-negative integers")

    @property
    def mu(self):
        return self.m + self.m_prime

    @property
    def nu(self):
        return self.m - self.m_prime


@dataclass(frozen=True)
class SeriesValue:
    value: float
    method: str
    truncation: Optional[int] = None
    tail_bound: Optional[float] = None
    leading_order: Optional[str] = None


def _check_r(r):
    if not (isinstance(r, (int, float, np.floating)) and math.isfinite(r) and r > 0):
        raise ValueError("radius must be finite and positive")
    return float(r)


def _shifted_bessel(j, k, L):
    """Rows J_{l+k} for l = 1..L given j = J_0..J_{L+|k|}; negative orders by parity."""
    idx = np.arange(1, L + 1) + k
    sign = np.where((idx < 0) & (np.abs(idx) % 2 == 1), -1.0, 1.0)
    return sign[:, None] * j[np.abs(idx)]


def series_direct(spec, r, tol=1e-15):
    r = _check_r(r)
    model = spec.model
    pad = max(abs(spec.m), abs(spec.m_prime))
    L = truncation_order(r, model.effective_s, tol, shift=pad)
    j, _, _ = bessel_table([r], L + pad)
    l = np.arange(1, L + 1)
    w = model.sigma(l) ** 2
    a = _shifted_bessel(j, spec.m, L)[:, 0]
    b = _shifted_bessel(j, spec.m_prime, L)[:, 0]
    val = float(np.sum(w * (a * b)))  # a * b keeps the (m, m') swap exact
    return SeriesValue(val, "direct", L, tail_bound(r, model.effective_s, L, pad))


def kind_sums_direct(model, radii, kinds=KINDS, tol=1e-15):
    """Direct sums for several derivative kinds at many radii at once."""
    radii = np.asarray(radii, dtype=float).ravel()
    L = truncation_order(float(radii.max()), model.effective_s, tol, shift=2)
    j, jp, jpp = bessel_table(radii, L)
    tabs = (j[1:], jp[1:], jpp[1:])
    w = model.sigma(np.arange(1, L + 1)) ** 2
    out = {}
    for kind in kinds:
        p, q = _KIND_ORDERS[kind]
        out[kind] = np.einsum("l,ln,ln->n", w, tabs[p], tabs[q])
    return out


# --- asymptotics -----------------------------------------------------------

def arccos_moment(s, nu):
    """int_0^1 x^{-2s} cos(nu arccos x) / sqrt(1 - x^2) dx in closed form.

    Equals pi 2^{2s-1} Gamma(1-2s) / (Gamma(1-s-nu/2) Gamma(1-s+nu/2)) for
    s < 1/2, and vanishes whenever a reciprocal Gamma does.
    """
    if not s < 0.5:
        raise ValueError("the arccos moment needs s < 1/2")
    return math.pi * 2.0 ** (2 * s - 1) * gamma_ratio([1 - 2 * s], [1 - s - nu / 2, 1 - s + nu / 2])


def _regime(s):
    if abs(s - 0.5) <= HALF_EPS:
        return "half"
    return "below" if s < 0.5 else "above"


def neumann_leading(spec, phase=None):
    """Leading term of the general series as a Leading; phase defaults to r via at()."""
    model = spec.model
    if not model.is_default:
        raise ValueError("asymptotics only exist for the pure power weight")
    s = model.effective_s
    mu, nu = spec.mu, spec.nu
    reg = _regime(s)
    if reg == "below":
        return Leading(arccos_moment(s, nu) / math.pi, -2.0 * s)
    if phase is None:
        raise ValueError("phase needed for oscillating regimes")
    phase = np.asarray(phase, dtype=float)
    osc = np.sin(2 * phase - math.pi * mu / 2)
    if reg == "half":
        if nu % 2 == 0:
            return Leading(math.cos(math.pi * nu / 2) / math.pi + 0 * phase, -1.0, 1.0)
        return Leading(math.sin(math.pi * abs(nu) / 2) / 2 - math.log(2) / math.pi * osc, -1.0)
    z = zeta(2 * s)
    mean = z * math.cos(math.pi * nu / 2) / math.pi
    swing = z * (1 - 2.0 ** (1 - 2 * s)) / math.pi
    return Leading(mean - swing * osc, -1.0)


def kind_leading(kind, s, phase):
    """Leading term of sum l^{-2s} (product named by kind) with oscillation phase."""
    if kind not in _KIND_ORDERS:
        raise ValueError(f"unknown series kind {kind!r}")
    reg = _regime(s)
    phase = np.asarray(phase, dtype=float)
    ones = np.ones_like(phase)
    if reg == "below":
        if kind == "JJ":
            c = gamma_ratio([1 - 2 * s], [1 - s, 1 - s]) * 2.0 ** (2 * s - 1)
        elif kind == "JpJp":
            c = gamma_ratio([0.5 - s], [2 - s]) / (4 * math.sqrt(math.pi))
        elif kind == "JJpp":
            c = -gamma_ratio([0.5 - s], [2 - s]) / (4 * math.sqrt(math.pi))
        elif kind == "JppJpp":
            c = 3 * 2.0 ** (2 * s - 5) * (2 - 2 * s) * (4 - 2 * s) * gamma_ratio([1 - 2 * s], [3 - s, 3 - s])
        else:
            return Leading.zero()
        return Leading(c * ones, -2.0 * s)
    if reg == "half":
        c = {"JJ": 1.0, "JpJp": 1.0, "JJpp": -1.0, "JppJpp": 1.0}.get(kind)
        if c is None:
            return Leading.zero()
        return Leading(c / math.pi * ones, -1.0, 1.0)
    zed = zeta(2 * s) / math.pi
    b = 2.0 ** (1 - 2 * s) - 1
    sn, cs = np.sin(2 * phase), np.cos(2 * phase)
    coef = {"JJ": zed * (b * sn + 1), "JJp": zed * b * cs, "JpJp": zed * (1 - b * sn),
            "JJpp": -zed * (b * sn + 1), "JpJpp": -zed * b * cs,
            "JppJpp": zed * (b * sn + 1)}[kind]
    return Leading(coef, -1.0)


def _order_label(term):
    if term.is_zero:
        return "o(leading)"
    p = term.power
    if term.log_power:
        return f"r^{p:g} log r"
    return f"r^{p:g}"


def series_asymptotic(spec, r, min_r=10.0):
    r = _check_r(r)
    if r < min_r:
        raise ValueError(f"asymptotic evaluation needs r >= {min_r}")
    term = neumann_leading(spec, phase=r)
    return SeriesValue(float(term.at(r)), "asymptotic", leading_order=_order_label(term))


def derivative_series(kind, s, r, method="direct", tol=1e-15, min_r=10.0):
    """sum_{l>=1} sigma_l^2 (product named by kind) at radius r."""
    model = as_model(s)
    r = _check_r(r)
    if kind not in _KIND_ORDERS:
        raise ValueError(f"unknown series kind {kind!r}")
    if method == "direct":
        L = truncation_order(r, model.effective_s, tol, shift=2)
        val = kind_sums_direct(model, [r], (kind,), tol)[kind][0]
        return SeriesValue(float(val), "direct", L, tail_bound(r, model.effective_s, L, 2))
    if method == "asymptotic":
        if not model.is_default:
            raise ValueError("asymptotics only exist for the pure power weight")
        if r < min_r:
            raise ValueError(f"asymptotic evaluation needs r >= {min_r}")
        term = kind_leading(kind, model.effective_s, r)
        return SeriesValue(float(term.at(r)), "asymptotic", leading_order=_order_label(term))
    raise ValueError(f"unknown method {method!r}")


def sub_half_constant(s, nu):
    """Coefficient of r^{-2s} in the series for s < 1/2; exactly 0 at Gamma poles."""
    return 2.0 ** (2 * s - 1) * gamma_ratio([1 - 2 * s], [1 - s - nu / 2, 1 - s + nu / 2])

