from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Interval:
    """Elementwise closed intervals ``[lo, hi]`` over numpy arrays.

    Every operation returns an enclosure of all values the exact expression can
    take, so chaining operations yields a sound (possibly loose) bound.
    Unbounded ends are represented by ``-inf`` / ``inf``.
    """

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def point(cls, value):
        value = np.asarray(value, dtype=float)
        return cls(value, value)

    @classmethod
    def around(cls, center, radius):
        center = np.asarray(center, dtype=float)
        return cls(center - radius, center + radius)

    @classmethod
    def unbounded_like(cls, ref):
        shape = np.shape(ref)
        return cls(np.full(shape, -np.inf), np.full(shape, np.inf))

    def __add__(self, other):
        other = _coerce(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        with np.errstate(invalid="ignore"):
            products = np.stack(np.broadcast_arrays(
                self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi))
        # 0 * inf is taken as 0, the usual convention for closed intervals
        products = np.where(np.isnan(products), 0.0, products)
        undefined = self.has_nan() | other.has_nan()
        lo = np.where(undefined, np.nan, products.min(axis=0))
        hi = np.where(undefined, np.nan, products.max(axis=0))
        return Interval(lo, hi)

    def has_nan(self):
        return np.isnan(self.lo) | np.isnan(self.hi)

    __rmul__ = __mul__

    def divide(self, other, tol=0.0):
        """Divide by ``other``; divisors reaching into ``[-tol, tol]`` give ``(-inf, inf)``."""
        other = _coerce(other)
        singular = (other.lo <= tol) & (other.hi >= -tol)
        safe_lo = np.where(singular, 1.0, other.lo)
        safe_hi = np.where(singular, 1.0, other.hi)
        quotient = self * Interval(1.0 / safe_hi, 1.0 / safe_lo)
        lo = np.where(singular, -np.inf, quotient.lo)
        hi = np.where(singular, np.inf, quotient.hi)
        return Interval(lo, hi)

    def square(self):
        lo2, hi2 = self.lo ** 2, self.hi ** 2
        straddles = (self.lo <= 0) & (self.hi >= 0)
        return Interval(np.where(straddles, 0.0, np.minimum(lo2, hi2)), np.maximum(lo2, hi2))

    def sqrt(self):
        return Interval(np.sqrt(np.maximum(self.lo, 0.0)), np.sqrt(np.maximum(self.hi, 0.0)))

    def is_bounded(self):
        return np.isfinite(self.lo) & np.isfinite(self.hi)

    def overlaps(self, lo, hi):
        """Elementwise test against ``[lo, hi]``; NaN bounds count as overlapping."""
        result = (self.hi >= lo) & (self.lo <= hi)
        return result | self.has_nan()


def _coerce(value):
    if isinstance(value, Interval):
        return value
    return Interval.point(value)
