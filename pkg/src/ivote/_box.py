from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log, log2

import numpy as np

# absolute tolerance for grid-index boundary cases
GRID_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box inside the unit cube ``[0, 1]^d``.

    Parameters
    ----------
    min_corner
        d-vector of lower bounds
    max_corner
        d-vector of upper bounds
    """

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=float).reshape(-1)
        hi = np.asarray(self.max_corner, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError(f"Box corners must be non-empty vectors of equal length, got {lo.shape} and {hi.shape}.")
        if np.any(lo > hi):
            raise ValueError(f"Box min_corner {lo} exceeds max_corner {hi}.")
        if np.any(lo < -GRID_ATOL) or np.any(hi > 1 + GRID_ATOL):
            raise ValueError(f"Box [{lo}, {hi}] is not contained in the unit cube.")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @classmethod
    def unit(cls, d):
        return cls(np.zeros(d), np.ones(d))

    @property
    def d(self):
        return self.min_corner.size

    @property
    def sides(self):
        return self.max_corner - self.min_corner

    @property
    def diameter(self):
        """Largest side length."""
        return float(self.sides.max())

    @property
    def center(self):
        return 0.5 * (self.min_corner + self.max_corner)

    def contains(self, point, atol=GRID_ATOL):
        point = np.asarray(point, dtype=float)
        return bool(np.all(point >= self.min_corner - atol) and np.all(point <= self.max_corner + atol))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.min_corner, other.min_corner) and np.array_equal(self.max_corner, other.max_corner)

    def __hash__(self):
        return hash((self.min_corner.tobytes(), self.max_corner.tobytes()))

    def __repr__(self):
        return f"Box({self.min_corner.tolist()}, {self.max_corner.tolist()})"


@dataclass(frozen=True, eq=False)
class Tolerance:
    """Per-coordinate voting tolerance.

    Parameters
    ----------
    eps
        d-vector of positive tolerances in unit-cube coordinates
    eps_prime_scale
        the constant ``c`` in ``eps' = eps / (c log(1/eps))``
    """

    eps: np.ndarray
    eps_prime_scale: float = 1.0

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float).reshape(-1)
        if eps.size == 0 or np.any(~np.isfinite(eps)) or np.any(eps <= 0) or np.any(eps > 1):
            raise ValueError(f"Tolerance entries must lie in (0, 1], got {eps}.")
        if not self.eps_prime_scale > 0:
            raise ValueError(f"eps_prime_scale must be positive, got {self.eps_prime_scale}.")
        object.__setattr__(self, "eps", eps)

    @classmethod
    def uniform(cls, value, d, eps_prime_scale=1.0):
        return cls(np.full(d, float(value)), eps_prime_scale)

    @property
    def d(self):
        return self.eps.size

    @property
    def eps_min(self):
        return float(self.eps.min())

    @property
    def eps_prime(self):
        """Canonization tolerance per coordinate; never larger than ``eps``."""
        logs = np.log(1.0 / self.eps)
        return self.eps / np.maximum(1.0, self.eps_prime_scale * logs)

    def with_scale(self, eps_prime_scale):
        return Tolerance(self.eps, eps_prime_scale)

    def __eq__(self, other):
        if not isinstance(other, Tolerance):
            return NotImplemented
        return np.array_equal(self.eps, other.eps) and self.eps_prime_scale == other.eps_prime_scale

    def __hash__(self):
        return hash((self.eps.tobytes(), self.eps_prime_scale))


def subdivide(box, axes=None):
    """Halve a box along the given axes.

    Parameters
    ----------
    box
        box to split
    axes, optional
        indices of the axes to halve, by default all ``d`` axes

    Returns
    -------
        list of ``2**len(axes)`` boxes in octant order: bit ``j`` of the
        octant index selects the upper half of ``axes[j]``
    """
    axes = list(range(box.d)) if axes is None else list(axes)
    mid = box.center
    children = []
    for octant in range(2 ** len(axes)):
        lo = box.min_corner.copy()
        hi = box.max_corner.copy()
        for bit, axis in enumerate(axes):
            if octant >> bit & 1:
                lo[axis] = mid[axis]
            else:
                hi[axis] = mid[axis]
        children.append(Box(lo, hi))
    return children


def grid_levels(box, tol):
    """Number of halvings per axis until the side drops to its tolerance."""
    if tol.d != box.d:
        raise ValueError(f"Tolerance has {tol.d} coordinates but the box has {box.d}.")
    levels = []
    for side, eps in zip(box.sides, tol.eps):
        if side <= eps * (1 + GRID_ATOL):
            levels.append(0)
        else:
            levels.append(int(ceil(log2(side / eps) - GRID_ATOL)))
    return np.array(levels, dtype=int)


def cell_sizes(box, tol):
    """Grid spacing per axis of the epsilon-grid over ``box``."""
    return box.sides / 2.0 ** grid_levels(box, tol)


def default_max_depth(tol):
    return int(ceil(log(1.0 / tol.eps_min, 2))) + 2
