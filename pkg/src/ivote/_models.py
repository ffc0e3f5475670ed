from __future__ import annotations

from dataclasses import dataclass
from warnings import warn

import numpy as np

from ._errors import DomainError
from ._interval import Interval
from ._surface import ParametricSurface, SpaceMap, SurfaceFamily, register_family


def _linear_range(coeffs, lower, upper):
    """Exact range of ``coeffs @ x`` over the box ``[lower, upper]``; coeffs has shape (m, k)."""
    a = coeffs * lower
    b = coeffs * upper
    return np.minimum(a, b).sum(axis=1), np.maximum(a, b).sum(axis=1)


def _as_items(items, width, tag):
    items = np.asarray(items, dtype=float)
    if items.ndim != 2 or items.shape[1] != width:
        raise ValueError(f"{tag} items must have shape (n, {width}), got {items.shape}.")
    return items


def _drop_warning(tag, dropped, reason):
    if dropped:
        warn(f"{tag}: dropped {dropped} item(s) {reason}.")


class AffineFamily(SurfaceFamily):
    """Families whose dependent coordinates are affine in the free coordinates.

    ``affine_coefficients`` returns ``A`` of shape (m, d - k, k) with
    ``F(x; t) = A x``; the interval enclosure is then exact.
    """

    def affine_coefficients(self, essential):
        raise NotImplementedError

    def dependent(self, x, essential):
        return np.einsum("mjk,pk->mpj", self.affine_coefficients(essential), x)

    def dependent_bounds(self, lower, upper, essential):
        coeffs = self.affine_coefficients(essential)
        m, n_dep, k = coeffs.shape
        lo, hi = _linear_range(coeffs.reshape(m * n_dep, k), lower, upper)
        return Interval(lo.reshape(m, n_dep), hi.reshape(m, n_dep))


@register_family
class Line2Family(AffineFamily):
    """Dual of 2D line fitting: each point ``p`` votes along ``b = p2 - a * p1``.

    Voting axes are ``(a, b)``.
    """

    tag = "line2"
    d, k, ell = 2, 1, 1
    axes = ("a", "b")
    item_fields = ("p1", "p2")

    def affine_coefficients(self, essential):
        return np.asarray(essential, dtype=float).reshape(-1, 1, 1)

    def parameters_from_items(self, items):
        items = _as_items(items, 2, self.tag)
        keep = np.all(np.isfinite(items), axis=1)
        _drop_warning(self.tag, int((~keep).sum()), "with non-finite coordinates")
        return -items[keep, :1], items[keep, 1:], keep


@register_family
class HyperplaneFamily(AffineFamily):
    """Dual of hyperplane fitting ``x_d = a_0 + sum(a_i x_i)``.

    A point votes along ``a_0 = x_d - sum(x_i a_i)`` over the free
    coordinates ``a_1..a_{d-1}``; voting axes are ``(a_1, ..., a_{d-1}, a_0)``.

    Parameters
    ----------
    d, optional
        ambient dimension, by default 3
    space_map, optional
        physical axis ranges, by default the unit cube
    """

    tag = "hyperplane"

    def __init__(self, d=3, space_map=None):
        if d < 2:
            raise ValueError(f"hyperplane needs d >= 2, got {d}.")
        self.d, self.k, self.ell = d, d - 1, d - 1
        self.axes = tuple(f"a_{i}" for i in range(1, d)) + ("a_0",)
        self.item_fields = tuple(f"x_{i}" for i in range(1, d + 1))
        super().__init__(space_map)

    def affine_coefficients(self, essential):
        essential = np.asarray(essential, dtype=float).reshape(-1, self.ell)
        return -essential[:, None, :]

    def parameters_from_items(self, items):
        items = _as_items(items, self.d, self.tag)
        keep = np.all(np.isfinite(items), axis=1)
        _drop_warning(self.tag, int((~keep).sum()), "with non-finite coordinates")
        return items[keep, :-1], items[keep, -1:], keep


@register_family
class Ray3Family(AffineFamily):
    """Rays ``y = a x + b``, ``z = c x + d`` in the unit cube, voting for a common point."""

    tag = "ray3"
    d, k, ell = 3, 1, 2
    axes = ("x", "y", "z")
    item_fields = ("a", "b", "c", "d")
    # rays steeper than this are not representable over x
    slope_cap = 1e3

    def affine_coefficients(self, essential):
        return np.asarray(essential, dtype=float).reshape(-1, 2, 1)

    def parameters_from_items(self, items):
        items = _as_items(items, 4, self.tag)
        keep = np.all(np.isfinite(items), axis=1)
        keep &= (np.abs(items[:, 0]) <= self.slope_cap) & (np.abs(items[:, 2]) <= self.slope_cap)
        _drop_warning(self.tag, int((~keep).sum()), f"that are non-finite or steeper than {self.slope_cap:g}")
        return items[keep][:, [0, 2]], items[keep][:, [1, 3]], keep


@register_family
class Sim2Family(AffineFamily):
    """2D similarity alignment from point pairs ``(p, q)``.

    The transform is ``qx = a px + b py + c`` and ``qy = -b px + a py + d``.
    A pair fixes ``(a, b)`` as an affine function of the translation
    ``(c, d)``, which are therefore the free coordinates: voting axes are
    ``(c, d, a, b)``.
    """

    tag = "sim2"
    d, k, ell = 4, 2, 2
    axes = ("c", "d", "a", "b")
    item_fields = ("px", "py", "qx", "qy")

    def default_space_map(self):
        return SpaceMap([-1.0, -1.0, -2.0, -2.0], [1.0, 1.0, 2.0, 2.0])

    def affine_coefficients(self, essential):
        essential = np.asarray(essential, dtype=float).reshape(-1, 2)
        u, v = essential[:, 0], essential[:, 1]
        return np.stack([np.stack([-u, -v], axis=1), np.stack([-v, u], axis=1)], axis=1)

    def parameters_from_items(self, items):
        items = _as_items(items, 4, self.tag)
        px, py, qx, qy = items.T
        norm2 = px ** 2 + py ** 2
        keep = np.all(np.isfinite(items), axis=1) & (norm2 > self.denominator_tol)
        _drop_warning(self.tag, int((~keep).sum()), "with the source point at the origin")
        px, py, qx, qy, norm2 = px[keep], py[keep], qx[keep], qy[keep], norm2[keep]
        essential = np.stack([px / norm2, py / norm2], axis=1)
        free = np.stack([(px * qx + py * qy) / norm2, (py * qx - px * qy) / norm2], axis=1)
        return essential, free, keep


@dataclass(frozen=True)
class Ray3:
    """Ray ``y = a x + b``, ``z = c x + d``."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        values = np.array([self.a, self.b, self.c, self.d], dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"Ray parameters must be finite, got {values}.")
        if abs(self.a) > Ray3Family.slope_cap or abs(self.c) > Ray3Family.slope_cap:
            raise ValueError(f"Ray slopes ({self.a}, {self.c}) exceed {Ray3Family.slope_cap:g}.")

    def as_item(self):
        return np.array([self.a, self.b, self.c, self.d])


@dataclass(frozen=True)
class SimilarityParams:
    """2D similarity with ``a = s cos(theta)``, ``b = s sin(theta)`` and translation ``(c, d)``."""

    a: float
    b: float
    c: float
    d: float

    @classmethod
    def from_scale_angle(cls, scale, angle, c, d):
        return cls(scale * np.cos(angle), scale * np.sin(angle), c, d)

    @property
    def scale(self):
        return float(np.hypot(self.a, self.b))

    @property
    def angle(self):
        return float(np.arctan2(self.b, self.a))

    def apply(self, points):
        """Map points of shape (..., 2)."""
        points = np.asarray(points, dtype=float)
        px, py = points[..., 0], points[..., 1]
        return np.stack([self.a * px + self.b * py + self.c, -self.b * px + self.a * py + self.d], axis=-1)

    def as_point(self):
        return np.array([self.c, self.d, self.a, self.b])


def line_surface_from_point(p, source_id=0):
    """Dual surface ``b = p2 - a * p1`` of a 2D point.

    Parameters
    ----------
    p
        finite 2-vector
    source_id, optional
        item identifier recorded on the surface, by default 0

    Returns
    -------
        ParametricSurface with ``model_tag == "line2"``
    """
    p1, p2 = (float(v) for v in np.asarray(p, dtype=float).reshape(2))
    if not (np.isfinite(p1) and np.isfinite(p2)):
        raise ValueError(f"Point must be finite, got {(p1, p2)}.")
    return ParametricSurface(2, 1, (-p1,), (p2,), "line2", frozenset({source_id}))


def hyperplane_surface_eval(point, coeffs):
    """Offset ``a_0 = x_d - sum(x_i a_i)`` of the hyperplane through ``point`` with slopes ``coeffs``."""
    point = np.asarray(point, dtype=float).reshape(-1)
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    if coeffs.size != point.size - 1:
        raise ValueError(f"Expected {point.size - 1} coefficients for a {point.size}-vector, got {coeffs.size}.")
    return float(point[-1] - point[:-1] @ coeffs)


def ray_surface_eval(ray, x):
    return ray.a * x + ray.b, ray.c * x + ray.d


def similarity_surface_eval(p, q, c, d, tol=SurfaceFamily.denominator_tol):
    """Similarity ``(a, b)`` mapping ``p`` onto ``q`` given the translation ``(c, d)``."""
    px, py = np.asarray(p, dtype=float).reshape(2)
    qx, qy = np.asarray(q, dtype=float).reshape(2) - np.array([c, d], dtype=float)
    norm2 = px ** 2 + py ** 2
    if norm2 <= tol:
        raise DomainError(f"source point {(px, py)} lies at the origin", "sim2")
    return float((px * qx + py * qy) / norm2), float((py * qx - px * qy) / norm2)
