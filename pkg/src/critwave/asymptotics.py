"""Leading-order arithmetic on terms coef * r^power * (log r)^log_power.

Coefficients may be numpy arrays indexed by an oscillation phase, which is
how terms like (a - b sin(2r - phi)) / r are carried through the
covariance algebra. A term with power -inf is an exact zero.
"""
from dataclasses import dataclass
import math

import numpy as np

_ORDER_EPS = 1e-12


class LeadingOrderCancellation(ArithmeticError):
    pass


@dataclass(frozen=True)
class Leading:
    coef: object
    power: float
    log_power: float = 0.0

    @staticmethod
    def zero():
        return Leading(0.0, -math.inf, 0.0)

    @property
    def is_zero(self):
        return self.power == -math.inf

    def order(self):
        return (self.power, self.log_power)

    def _cmp(self, other):
        """+1 if self dominates, -1 if other does, 0 if same order."""
        if self.is_zero and other.is_zero:
            return 0
        if self.is_zero:
            return -1
        if other.is_zero:
            return 1
        dp = self.power - other.power
        if abs(dp) > _ORDER_EPS:
            return 1 if dp > 0 else -1
        dq = self.log_power - other.log_power
        if abs(dq) > _ORDER_EPS:
            return 1 if dq > 0 else -1
        return 0

    def __add__(self, other):
        c = self._cmp(other)
        if c > 0:
            return self
        if c < 0:
            return other
        if self.is_zero:
            return self
        coef = np.asarray(self.coef) + np.asarray(other.coef)
        scale = np.max(np.abs(self.coef)) + np.max(np.abs(other.coef))
        if np.max(np.abs(coef)) <= 1e-12 * scale:
            raise LeadingOrderCancellation("leading terms cancel")
        return Leading(coef, self.power, self.log_power)

    def __neg__(self):
        return Leading(-np.asarray(self.coef), self.power, self.log_power)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Leading):
            if np.all(np.asarray(other) == 0):
                return Leading.zero()
            return Leading(np.asarray(self.coef) * other, self.power, self.log_power)
        if self.is_zero or other.is_zero:
            return Leading.zero()
        return Leading(np.asarray(self.coef) * np.asarray(other.coef),
                       self.power + other.power, self.log_power + other.log_power)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Leading):
            return Leading(np.asarray(self.coef) / other, self.power, self.log_power)
        if other.is_zero:
            raise ZeroDivisionError("division by an exact zero term")
        if self.is_zero:
            return self
        return Leading(np.asarray(self.coef) / np.asarray(other.coef),
                       self.power - other.power, self.log_power - other.log_power)

    def sqrt(self):
        if self.is_zero:
            return self
        coef = np.asarray(self.coef)
        if np.any(coef < 0):
            raise ValueError("square root of a negative leading coefficient")
        return Leading(np.sqrt(coef), 0.5 * self.power, 0.5 * self.log_power)

    def at(self, r):
        if self.is_zero:
            return 0.0 * np.asarray(r, dtype=float)
        r = np.asarray(r, dtype=float)
        val = np.asarray(self.coef) * r ** self.power
        if self.log_power:
            val = val * np.log(r) ** self.log_power
        return val


def dominant(*terms):
    """Keep the terms of the highest order, zero out the rest."""
    best = Leading.zero()
    for t in terms:
        if t._cmp(best) > 0:
            best = t
    return [t if (not t.is_zero and t._cmp(best) == 0) else Leading.zero() for t in terms]
