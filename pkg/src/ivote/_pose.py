from __future__ import annotations

from dataclasses import dataclass
from warnings import warn

import numpy as np
from scipy.spatial.transform import Rotation

from ._errors import DomainError
from ._interval import Interval
from ._surface import SpaceMap, SurfaceFamily, register_family

POSE_ITEM_FIELDS = ("w1", "w2", "w3", "xi", "eta")


def angle_axis_to_matrix(phi):
    """Rotation matrices for angle-axis vectors of shape (3,) or (P, 3)."""
    phi = np.asarray(phi, dtype=float)
    return Rotation.from_rotvec(phi).as_matrix()


def matrix_to_angle_axis(matrix):
    return Rotation.from_matrix(np.asarray(matrix, dtype=float)).as_rotvec()


def rotation_angle_between(first, second):
    """Geodesic angle in radians between two rotation matrices."""
    relative = np.asarray(first, dtype=float).T @ np.asarray(second, dtype=float)
    return float(Rotation.from_matrix(relative).magnitude())


def _angle_between(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise DomainError("zero-length direction")
    if u.size == 2:
        sine = abs(u[0] * v[1] - u[1] * v[0])
    else:
        sine = np.linalg.norm(np.cross(u, v))
    # atan2 keeps precision near 0 and pi
    return float(np.arctan2(sine, u @ v))


def _stack(*intervals):
    return Interval(np.stack([i.lo for i in intervals], axis=-1), np.stack([i.hi for i in intervals], axis=-1))


@dataclass(frozen=True)
class Correspondence:
    """A 2D-3D match: world point ``w`` seen at normalized image coordinates ``(xi, eta)``."""

    w: tuple
    xi: float
    eta: float

    def __post_init__(self):
        w = tuple(float(v) for v in np.asarray(self.w, dtype=float).reshape(3))
        if not (np.all(np.isfinite(w)) and np.isfinite(self.xi) and np.isfinite(self.eta)):
            raise ValueError(f"Correspondence entries must be finite, got {w}, {self.xi}, {self.eta}.")
        object.__setattr__(self, "w", w)

    @classmethod
    def from_item(cls, item):
        w1, w2, w3, xi, eta = np.asarray(item, dtype=float).reshape(5)
        return cls((w1, w2, w3), float(xi), float(eta))

    def as_item(self):
        return np.array([*self.w, self.xi, self.eta])


@dataclass(frozen=True)
class PoseHypothesis:
    """Camera pose in the coordinates of one posing model.

    For ``pose5`` the camera is gravity aligned: ``position`` is the camera
    center in world coordinates, ``kappa = tan(theta)`` its heading and
    ``focal`` the factor turning image coordinates into bearing tangents.
    For ``pose6``/``pose7``/``radial5`` ``position`` is the camera-frame
    translation ``t`` in ``X = R(phi) w + t``; the radial model does not
    observe the forward component, which is NaN. There ``(x, y)`` enters as
    ``t = (-y, x, .)``.
    """

    model_tag: str
    position: tuple
    kappa: float = None
    phi: tuple = None
    focal: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in np.asarray(self.position, dtype=float).reshape(3)))
        if self.phi is not None:
            object.__setattr__(self, "phi", tuple(float(v) for v in np.asarray(self.phi, dtype=float).reshape(3)))
        if self.model_tag == "pose5" and self.kappa is None:
            raise ValueError("pose5 hypotheses need kappa.")
        if self.model_tag != "pose5" and self.phi is None:
            raise ValueError(f"{self.model_tag} hypotheses need phi.")
        if not self.focal > 0:
            raise ValueError(f"Focal must be positive, got {self.focal}.")

    @classmethod
    def from_point(cls, model_tag, point):
        """Unpack a physical voting point given in the model's axis order."""
        p = np.asarray(point, dtype=float).reshape(-1)
        if model_tag == "pose5":
            x, y, f, z, kappa = p
            return cls(model_tag, (x, y, z), kappa=float(kappa), focal=float(f))
        if model_tag == "pose6":
            z, p1, p2, p3, x, y = p
            return cls(model_tag, (x, y, z), phi=(p1, p2, p3))
        if model_tag == "pose7":
            z, p1, p2, p3, f, x, y = p
            return cls(model_tag, (x, y, z), phi=(p1, p2, p3), focal=float(f))
        if model_tag == "radial5":
            y, p1, p2, p3, x = p
            return cls(model_tag, (x, y, np.nan), phi=(p1, p2, p3))
        raise DomainError(f"{model_tag!r} is not a posing model", model_tag)

    def to_point(self):
        x, y, z = self.position
        if self.model_tag == "pose5":
            return np.array([x, y, self.focal, z, self.kappa])
        if self.model_tag == "pose6":
            return np.array([z, *self.phi, x, y])
        if self.model_tag == "pose7":
            return np.array([z, *self.phi, self.focal, x, y])
        return np.array([y, *self.phi, x])

    @property
    def heading(self):
        return float(np.arctan(self.kappa))

    def rotation(self):
        """World-to-camera rotation; for pose5 the yaw about the vertical axis."""
        if self.model_tag == "pose5":
            return Rotation.from_rotvec([0.0, 0.0, -self.heading]).as_matrix()
        return angle_axis_to_matrix(self.phi)

    def translation(self):
        x, y, z = self.position
        if self.model_tag == "radial5":
            return np.array([-y, x, np.nan])
        return np.array([x, y, z])

    def camera_center(self):
        if self.model_tag == "pose5":
            return np.array(self.position)
        return -self.rotation().T @ self.translation()

    def project(self, w):
        """Image coordinates ``(xi, eta)`` of world points of shape (3,) or (n, 3)."""
        w = np.asarray(w, dtype=float)
        if self.model_tag == "pose5":
            d = np.atleast_2d(w) - np.array(self.position)
            bearing = np.arctan2(d[:, 1], d[:, 0]) - self.heading
            xi = np.tan(bearing) / self.focal
            eta = d[:, 2] / (self.focal * np.hypot(d[:, 0], d[:, 1]))
        else:
            cam = np.atleast_2d(w) @ self.rotation().T + self.translation()
            if self.model_tag == "radial5":
                xi, eta = cam[:, 0], cam[:, 1]
            else:
                xi, eta = self.focal * cam[:, 0] / cam[:, 2], self.focal * cam[:, 1] / cam[:, 2]
        out = np.stack([xi, eta], axis=-1)
        return out[0] if w.ndim == 1 else out

    def bearing(self, correspondence):
        """World-frame viewing direction of a correspondence's image point."""
        if self.model_tag == "pose5":
            azimuth = self.heading + np.arctan(correspondence.xi * self.focal)
            return np.array([np.cos(azimuth), np.sin(azimuth), correspondence.eta * self.focal])
        cam = np.array([correspondence.xi / self.focal, correspondence.eta / self.focal, 1.0])
        return self.rotation().T @ cam


def reprojection_angular_error(pose, correspondence):
    """Angle between the observed viewing ray and the direction from the camera to ``w``.

    Parameters
    ----------
    pose
        PoseHypothesis of a pose5, pose6 or pose7 model
    correspondence
        the match to verify

    Returns
    -------
        angle in radians; points behind the camera give angles near pi
    """
    if pose.model_tag == "radial5":
        return radial_angular_error(pose, correspondence)
    direction = np.asarray(correspondence.w) - pose.camera_center()
    if np.linalg.norm(direction) == 0:
        raise DomainError("world point coincides with the camera center", pose.model_tag)
    return _angle_between(pose.bearing(correspondence), direction)


def radial_angular_error(pose, correspondence):
    """Angle between the radial line of the image point and that of the projected world point."""
    predicted = np.asarray(pose.project(np.asarray(correspondence.w)))
    observed = np.array([correspondence.xi, correspondence.eta])
    if np.linalg.norm(predicted) == 0 or np.linalg.norm(observed) == 0:
        raise DomainError("image point at the distortion center", pose.model_tag)
    return _angle_between(predicted, observed)


def pose5_surface_eval(c, x, y, f, tol=SurfaceFamily.denominator_tol):
    """Heading tangent and camera height for a camera at ``(x, y)`` with focal factor ``f``.

    Returns
    -------
        ``(kappa, z)``
    """
    if not f > 0:
        raise DomainError(f"focal factor must be positive, got {f}", "pose5")
    w1, w2, w3 = c.w
    dx, dy = w1 - x, w2 - y
    s = c.xi * f
    den = dx + s * dy
    if abs(den) <= tol:
        raise DomainError(f"heading is undefined at ({x}, {y}, {f})", "pose5")
    return (dy - s * dx) / den, w3 - c.eta * f * np.hypot(dx, dy)


def pose7_surface_eval(c, f, phi, z, focal_min=1e-6):
    """Translation ``(x, y)`` of a camera with rotation ``phi``, depth offset ``z`` and focal ``f``."""
    if not f > focal_min:
        raise DomainError(f"focal {f} is below the minimum {focal_min}", "pose7")
    rw = angle_axis_to_matrix(phi) @ np.asarray(c.w)
    depth = rw[2] + z
    return c.xi * depth / f - rw[0], c.eta * depth / f - rw[1]


def pose6_surface_eval(c, phi, z):
    return pose7_surface_eval(c, 1.0, phi, z)


def radial5_surface_eval(c, y, phi, tol=SurfaceFamily.denominator_tol):
    """Radial-model coordinate ``x`` given ``y`` and the rotation ``phi``."""
    if abs(c.xi) <= tol:
        raise DomainError(f"image coordinate xi={c.xi} is too close to zero", "radial5")
    rw = angle_axis_to_matrix(phi) @ np.asarray(c.w)
    return c.eta * (rw[0] - y) / c.xi - rw[1]


class _RotationFamily(SurfaceFamily):
    """Shared rotation handling of the angle-axis posing models.

    Free coordinates hold ``phi`` at positions ``phi_slice``.
    """

    item_fields = POSE_ITEM_FIELDS
    phi_slice = slice(1, 4)

    @staticmethod
    def _rotated(phi, w):
        """``R(phi_p) w_m`` with shape (m, P, 3)."""
        return np.einsum("pij,mj->mpi", angle_axis_to_matrix(np.atleast_2d(phi)), w)

    @staticmethod
    def _rotated_bounds(lower, upper, w):
        """Enclosure of ``R(phi) w`` over the box ``[lower, upper]`` of rotation vectors.

        The angle-axis exponential map is 1-Lipschitz into the rotation
        angle, so ``R(phi) w`` stays within ``|phi - phi_c| |w|`` of the center.
        """
        center = 0.5 * (lower + upper)
        radius = np.linalg.norm(0.5 * (upper - lower))
        rw = w @ angle_axis_to_matrix(center).T
        norms = np.linalg.norm(w, axis=1, keepdims=True)
        spread = radius * norms
        return Interval(np.maximum(rw - spread, -norms), np.minimum(rw + spread, norms))

    def parameters_from_items(self, items):
        items = np.asarray(items, dtype=float)
        if items.ndim != 2 or items.shape[1] != 5:
            raise ValueError(f"{self.tag} items must have shape (n, 5), got {items.shape}.")
        keep = np.all(np.isfinite(items), axis=1) & self._valid_items(items)
        dropped = int((~keep).sum())
        if dropped:
            warn(f"{self.tag}: dropped {dropped} correspondence(s) outside the model's domain.")
        return items[keep], np.zeros((int(keep.sum()), self.n_dependent)), keep

    def _valid_items(self, items):
        return np.ones(items.shape[0], dtype=bool)


@register_family
class Pose7Family(_RotationFamily):
    """Unknown focal length posing: voting axes ``(z, phi1, phi2, phi3, f, x, y)``.

    Both dependent coordinates carry an artificial free parameter fixed at 0.
    """

    tag = "pose7"
    d, k, ell = 7, 5, 5
    axes = ("z", "phi1", "phi2", "phi3", "f", "x", "y")
    focal_min = 1e-6

    def default_space_map(self):
        return SpaceMap([-2.5, -np.pi, -np.pi, -np.pi, 0.6, -25.0, -2.5], [2.5, np.pi, np.pi, np.pi, 1.3, 25.0, 2.5])

    def _focal(self, x):
        return x[:, 4]

    def _focal_bounds(self, lower, upper):
        return Interval(np.asarray(lower[4]), np.asarray(upper[4]))

    def dependent(self, x, essential):
        rw = self._rotated(x[:, self.phi_slice], essential[:, :3])
        focal = self._focal(x)
        focal = np.where(focal > self.focal_min, focal, np.nan)
        depth = (rw[..., 2] + x[None, :, 0]) / focal[None, :]
        xi, eta = essential[:, 3:4], essential[:, 4:5]
        return np.stack([xi * depth - rw[..., 0], eta * depth - rw[..., 1]], axis=-1)

    def dependent_bounds(self, lower, upper, essential):
        rw = self._rotated_bounds(lower[self.phi_slice], upper[self.phi_slice], essential[:, :3])
        depth = Interval(rw.lo[:, 2] + lower[0], rw.hi[:, 2] + upper[0])
        depth = depth.divide(self._focal_bounds(lower, upper), tol=self.focal_min)
        x = Interval.point(essential[:, 3]) * depth - Interval(rw.lo[:, 0], rw.hi[:, 0])
        y = Interval.point(essential[:, 4]) * depth - Interval(rw.lo[:, 1], rw.hi[:, 1])
        return _stack(x, y)


@register_family
class Pose6Family(Pose7Family):
    """Calibrated posing (``f = 1``): voting axes ``(z, phi1, phi2, phi3, x, y)``."""

    tag = "pose6"
    d, k, ell = 6, 4, 5
    axes = ("z", "phi1", "phi2", "phi3", "x", "y")

    def default_space_map(self):
        return SpaceMap([-2.5, -np.pi, -np.pi, -np.pi, -25.0, -2.5], [2.5, np.pi, np.pi, np.pi, 25.0, 2.5])

    def _focal(self, x):
        return np.ones(x.shape[0])

    def _focal_bounds(self, lower, upper):
        return Interval.point(1.0)


@register_family
class Radial5Family(_RotationFamily):
    """First stage of the radial camera model: voting axes ``(y, phi1, phi2, phi3, x)``.

    Focal length, distortion and the forward translation are not observed.
    """

    tag = "radial5"
    d, k, ell = 5, 4, 5
    axes = ("y", "phi1", "phi2", "phi3", "x")

    def default_space_map(self):
        return SpaceMap([-2.5, -np.pi, -np.pi, -np.pi, -25.0], [2.5, np.pi, np.pi, np.pi, 25.0])

    def _valid_items(self, items):
        return np.abs(items[:, 3]) > self.denominator_tol

    def dependent(self, x, essential):
        rw = self._rotated(x[:, self.phi_slice], essential[:, :3])
        xi = essential[:, 3:4]
        ratio = np.where(np.abs(xi) > self.denominator_tol, essential[:, 4:5] / xi, np.nan)
        return (ratio * (rw[..., 0] - x[None, :, 0]) - rw[..., 1])[..., None]

    def dependent_bounds(self, lower, upper, essential):
        rw = self._rotated_bounds(lower[self.phi_slice], upper[self.phi_slice], essential[:, :3])
        ratio = Interval.point(essential[:, 4]).divide(Interval.point(essential[:, 3]), tol=self.denominator_tol)
        first = Interval(rw.lo[:, 0] - upper[0], rw.hi[:, 0] - lower[0])
        x = ratio * first - Interval(rw.lo[:, 1], rw.hi[:, 1])
        return _stack(x)


@register_family
class Pose5Family(SurfaceFamily):
    """Gravity-aligned posing with unknown focal factor: voting axes ``(x, y, f, z, kappa)``.

    An item is ``(w1, w2, w3, xi, eta)``; ``w3`` is the free parameter of
    ``z`` and ``kappa`` carries an artificial one fixed at 0.
    """

    tag = "pose5"
    d, k, ell = 5, 3, 4
    axes = ("x", "y", "f", "z", "kappa")
    item_fields = POSE_ITEM_FIELDS

    def default_space_map(self):
        return SpaceMap([-25.0, -25.0, 0.6, -2.5, -1.0], [25.0, 25.0, 1.3, 2.5, 1.0])

    def dependent(self, x, essential):
        w1, w2, xi, eta = (essential[:, i:i + 1] for i in range(4))
        dx = w1 - x[None, :, 0]
        dy = w2 - x[None, :, 1]
        focal = np.where(x[:, 2] > 0, x[:, 2], np.nan)[None, :]
        s = xi * focal
        den = dx + s * dy
        den = np.where(np.abs(den) > self.denominator_tol, den, np.nan)
        z = -eta * focal * np.hypot(dx, dy)
        return np.stack([z, (dy - s * dx) / den], axis=-1)

    def dependent_bounds(self, lower, upper, essential):
        w1, w2, xi, eta = essential.T
        dx = Interval(w1 - upper[0], w1 - lower[0])
        dy = Interval(w2 - upper[1], w2 - lower[1])
        focal = Interval(np.asarray(lower[2]), np.asarray(upper[2]))
        s = Interval.point(xi) * focal
        distance = (dx.square() + dy.square()).sqrt()
        z = -(Interval.point(eta) * focal * distance)
        kappa = (dy - s * dx).divide(dx + s * dy, tol=self.denominator_tol)
        return _stack(z, kappa)

    def parameters_from_items(self, items):
        items = np.asarray(items, dtype=float)
        if items.ndim != 2 or items.shape[1] != 5:
            raise ValueError(f"pose5 items must have shape (n, 5), got {items.shape}.")
        keep = np.all(np.isfinite(items), axis=1)
        if not keep.all():
            warn(f"pose5: dropped {int((~keep).sum())} non-finite correspondence(s).")
        kept = items[keep]
        free = np.stack([kept[:, 2], np.zeros(kept.shape[0])], axis=1)
        return kept[:, [0, 1, 3, 4]], free, keep
