from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.spatial.transform import Rotation

from ._box import cell_sizes, grid_levels
from ._errors import UsageError
from ._instance import GroundTruth, ProblemInstance, surfaces_from_instance
from ._models import SimilarityParams
from ._pose import PoseHypothesis, rotation_angle_between
from ._surface import SpaceMap, as_surface_set, get_family
from ._voting import VoteResult

POSE_MODELS = ("pose5", "pose6", "pose7", "radial5")
# half extents of the normalized image plane used for decoy observations
IMAGE_HALF_WIDTH = 0.8
IMAGE_HALF_HEIGHT = 0.5
# reference focal factor; the posing brackets are multiples of it
FOCAL_REFERENCE = 1.0
# half width in radians of the rotation-vector cube voted over, centered on the identity
ROTATION_BRACKET = np.pi / 4


def make_rng(seed):
    """Portable seeded generator (PCG64)."""
    return np.random.Generator(np.random.PCG64(seed))


def _inlier_count(n, inlier_fraction):
    if not 0 <= inlier_fraction <= 1:
        raise ValueError(f"inlier_fraction must lie in [0, 1], got {inlier_fraction}.")
    return int(np.floor(n * inlier_fraction + 0.5))


def _shuffle(rng, inliers, outliers):
    """Stack rows and permute them; returns the items and the ids of the first block."""
    items = np.vstack([inliers, outliers])
    order = rng.permutation(items.shape[0])
    position = np.empty_like(order)
    position[order] = np.arange(order.size)
    return items[order], frozenset(position[:inliers.shape[0]].tolist())


def gen_line_instance(n, inlier_fraction, noise_sigma, seed):
    """Points on a planted line ``p2 = a p1 + b`` plus uniform outliers in the unit square.

    Parameters
    ----------
    n
        number of points
    inlier_fraction
        share of points placed on the line
    noise_sigma
        standard deviation of the vertical Gaussian noise
    seed
        generator seed

    Returns
    -------
        ProblemInstance of model ``line2``
    """
    rng = make_rng(seed)
    n_in = _inlier_count(n, inlier_fraction)
    a, b = rng.uniform(0.2, 0.6), rng.uniform(0.2, 0.4)
    x = rng.uniform(0.0, 1.0, n_in)
    inliers = np.column_stack([x, a * x + b + rng.normal(0.0, 1.0, n_in) * noise_sigma])
    outliers = rng.uniform(0.0, 1.0, (n - n_in, 2))
    items, ids = _shuffle(rng, inliers, outliers)
    return ProblemInstance("line2", items, 2, SpaceMap.identity(2), GroundTruth([a, b], ids), noise_sigma, seed)


def gen_hyperplane_instance(n, d, inlier_fraction, noise_sigma, seed):
    """Points near a planted hyperplane ``x_d = a_0 + sum(a_i x_i)`` plus uniform outliers."""
    if d < 2:
        raise ValueError(f"hyperplane instances need d >= 2, got {d}.")
    rng = make_rng(seed)
    n_in = _inlier_count(n, inlier_fraction)
    coeffs = rng.uniform(0.2, 0.6, d - 1) / (d - 1)
    offset = rng.uniform(0.2, 0.4)
    x = rng.uniform(0.0, 1.0, (n_in, d - 1))
    last = offset + x @ coeffs + rng.normal(0.0, 1.0, n_in) * noise_sigma
    inliers = np.column_stack([x, last])
    outliers = rng.uniform(0.0, 1.0, (n - n_in, d))
    items, ids = _shuffle(rng, inliers, outliers)
    truth = GroundTruth(np.append(coeffs, offset), ids)
    return ProblemInstance("hyperplane", items, d, SpaceMap.identity(d), truth, noise_sigma, seed)


def gen_ray_instance(n, n_crossing, seed):
    """``n_crossing`` rays through a planted point plus rays through uniform points of the cube."""
    if n_crossing > n:
        raise ValueError(f"n_crossing={n_crossing} exceeds n={n}.")
    rng = make_rng(seed)
    target = rng.uniform(0.25, 0.75, 3)

    def rays_through(points):
        slopes = rng.uniform(-1.0, 1.0, (points.shape[0], 2))
        b = points[:, 1] - slopes[:, 0] * points[:, 0]
        d = points[:, 2] - slopes[:, 1] * points[:, 0]
        return np.column_stack([slopes[:, 0], b, slopes[:, 1], d])

    crossing = rays_through(np.tile(target, (n_crossing, 1)))
    decoys = rays_through(rng.uniform(0.0, 1.0, (n - n_crossing, 3)))
    items, ids = _shuffle(rng, crossing, decoys)
    return ProblemInstance("ray3", items, 3, SpaceMap.identity(3), GroundTruth(target, ids), 0.0, seed)


@dataclass(frozen=True)
class SimilarityBracket:
    """Ranges a planted similarity is drawn from."""

    scale: tuple = (0.5, 1.5)
    angle: tuple = (-np.pi, np.pi)
    translation: tuple = (-0.5, 0.5)

    def __post_init__(self):
        if not 0 < self.scale[0] <= self.scale[1] <= 2.0:
            raise ValueError(f"scale bracket must lie in (0, 2], got {self.scale}.")
        if not -1.0 <= self.translation[0] <= self.translation[1] <= 1.0:
            raise ValueError(f"translation bracket must lie in [-1, 1], got {self.translation}.")
        if self.angle[0] > self.angle[1]:
            raise ValueError(f"empty angle bracket {self.angle}.")

    @classmethod
    def identity(cls):
        return cls((1.0, 1.0), (0.0, 0.0), (0.0, 0.0))


def gen_alignment_instance(n, inlier_fraction, transform_bracket=None, seed=0, noise_sigma=0.0):
    """Point pairs ``(p, q)`` related by a planted 2D similarity plus unrelated pairs."""
    bracket = transform_bracket or SimilarityBracket()
    rng = make_rng(seed)
    n_in = _inlier_count(n, inlier_fraction)
    transform = SimilarityParams.from_scale_angle(
        rng.uniform(*bracket.scale), rng.uniform(*bracket.angle),
        rng.uniform(*bracket.translation), rng.uniform(*bracket.translation))
    radius = np.sqrt(rng.uniform(0.05, 1.0, n))
    angle = rng.uniform(-np.pi, np.pi, n)
    p = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    q = transform.apply(p[:n_in]) + rng.normal(0.0, 1.0, (n_in, 2)) * noise_sigma
    decoys = np.column_stack([p[n_in:], rng.uniform(-1.5, 1.5, (n - n_in, 2))])
    items, ids = _shuffle(rng, np.column_stack([p[:n_in], q]), decoys)
    family = get_family("sim2")
    return ProblemInstance("sim2", items, 4, family.space_map, GroundTruth(transform.as_point(), ids), noise_sigma, seed)


def _jitter(directions, sigma, rng):
    """Rotate each direction by a Gaussian angle about a random perpendicular axis."""
    if sigma == 0:
        return directions
    axes = np.cross(directions, rng.normal(size=directions.shape))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.normal(0.0, sigma, directions.shape[0])
    return Rotation.from_rotvec(axes * angles[:, None]).apply(directions)


def _random_rotation_vector(rng, max_angle):
    axis = rng.normal(size=3)
    return axis / np.linalg.norm(axis) * rng.uniform(0.0, max_angle)


def _pose_scene(model_tag, n_points, rng, rotation_bracket):
    """Planted pose, visible scene points and the voting-space map.

    The space map depends only on the model and ``rotation_bracket``, never on
    the planted pose.
    """
    focal = FOCAL_REFERENCE * rng.uniform(0.7, 1.2) if model_tag in ("pose5", "pose7") else 1.0
    xi = rng.uniform(-IMAGE_HALF_WIDTH, IMAGE_HALF_WIDTH, n_points)
    eta = rng.uniform(-IMAGE_HALF_HEIGHT, IMAGE_HALF_HEIGHT, n_points)
    depth = rng.uniform(4.0, 30.0, n_points)
    f_lo, f_hi = 0.6 * FOCAL_REFERENCE, 1.3 * FOCAL_REFERENCE
    if model_tag == "pose5":
        center = np.array([rng.uniform(-15, 15), rng.uniform(-15, 15), rng.uniform(-1.5, 1.5)])
        truth = PoseHypothesis("pose5", center, kappa=float(np.tan(rng.uniform(-np.pi / 4, np.pi / 4))), focal=focal)
        azimuth = truth.heading + np.arctan(xi * focal)
        points = center + np.column_stack([depth * np.cos(azimuth), depth * np.sin(azimuth), eta * focal * depth])
        smap = SpaceMap([-25.0, -25.0, f_lo, -2.5, -1.0], [25.0, 25.0, f_hi, 2.5, 1.0])
        return truth, points, smap, None

    phi = _random_rotation_vector(rng, rotation_bracket)
    if model_tag == "radial5":
        translation = np.array([rng.uniform(-2.0, 2.0), rng.uniform(-20.0, 20.0), rng.uniform(-2.0, 2.0)])
        truth = PoseHypothesis("radial5", (translation[1], -translation[0], np.nan), phi=phi)
    else:
        translation = np.array([rng.uniform(-20.0, 20.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)])
        truth = PoseHypothesis(model_tag, translation, phi=phi, focal=focal)
    camera = np.column_stack([xi * depth / focal, eta * depth / focal, depth])
    points = (camera - translation) @ truth.rotation()

    phi_lo, phi_hi = np.full(3, -rotation_bracket), np.full(3, rotation_bracket)
    if model_tag == "pose6":
        smap = SpaceMap([-2.5, *phi_lo, -25.0, -2.5], [2.5, *phi_hi, 25.0, 2.5])
    elif model_tag == "pose7":
        smap = SpaceMap([-2.5, *phi_lo, f_lo, -25.0, -2.5], [2.5, *phi_hi, f_hi, 25.0, 2.5])
    else:
        smap = SpaceMap([-2.5, *phi_lo, -25.0], [2.5, *phi_hi, 25.0])
    return truth, points, smap, translation


def _observe(truth, points, noise_sigma_deg, rng, translation=None):
    """Noisy image coordinates of ``points`` under the planted pose.

    The radial model hides the forward translation, so its full planted
    ``translation`` is passed separately.
    """
    sigma = np.deg2rad(noise_sigma_deg)
    if truth.model_tag == "radial5":
        camera = _jitter(points @ truth.rotation().T + translation, sigma, rng)
        # radial distortion keeps the direction from the image center
        undistorted = camera[:, :2] / camera[:, 2:]
        return undistorted * (1 - 0.1 * np.sum(undistorted ** 2, axis=1, keepdims=True))
    center = truth.camera_center()
    directions = _jitter(points - center, sigma, rng)
    return truth.project(center + directions)


def gen_pose_instance(model_tag, n_points, n_matches_per_point, inlier_fraction, noise_sigma_deg, seed,
                      n_bearings=None, rotation_bracket=ROTATION_BRACKET):
    """Synthetic 2D-3D matching problem with a planted camera.

    Every scene point receives ``n_matches_per_point`` candidate image
    observations. ``round(n_points * n_matches_per_point * inlier_fraction)``
    of them (at most one per point) are the point's true, angularly jittered
    projection; the others are decoys drawn uniformly over the image plane.
    With ``n_bearings`` set, the instance instead holds all pairs of scene
    points and ``n_bearings`` observed bearings, of which the inlier share
    are true projections.

    Parameters
    ----------
    model_tag
        one of pose5, pose6, pose7, radial5
    n_points
        number of scene points
    n_matches_per_point
        candidates per point
    inlier_fraction
        share of correct matches among all matches
    noise_sigma_deg
        angular noise in degrees
    seed
        generator seed
    n_bearings, optional
        switch to the all-pairs regime with this many bearings, by default None
    rotation_bracket, optional
        half width in radians of the rotation-vector cube of the voting space,
        centered on the identity; the planted rotation angle stays below it.
        By default pi / 4

    Returns
    -------
        ProblemInstance with items ``(w1, w2, w3, xi, eta)``
    """
    if model_tag not in POSE_MODELS:
        raise UsageError(f"{model_tag!r} is not a posing model; expected one of {', '.join(POSE_MODELS)}")
    rng = make_rng(seed)
    truth, points, smap, translation = _pose_scene(model_tag, n_points, rng, rotation_bracket)
    d = get_family(model_tag).d

    if n_bearings is not None:
        n_true = min(_inlier_count(n_bearings, inlier_fraction), n_points)
        observed = np.vstack([
            _observe(truth, points[:n_true], noise_sigma_deg, rng, translation),
            np.column_stack([rng.uniform(-IMAGE_HALF_WIDTH, IMAGE_HALF_WIDTH, n_bearings - n_true),
                             rng.uniform(-IMAGE_HALF_HEIGHT, IMAGE_HALF_HEIGHT, n_bearings - n_true)]),
        ])
        pairs = np.array(list(product(range(n_points), range(n_bearings))))
        items = np.column_stack([points[pairs[:, 0]], observed[pairs[:, 1]]])
        ids = frozenset(np.flatnonzero((pairs[:, 0] == pairs[:, 1]) & (pairs[:, 1] < n_true)).tolist())
        return ProblemInstance(model_tag, items, d, smap, GroundTruth(truth.to_point(), ids), noise_sigma_deg, seed)

    total = n_points * n_matches_per_point
    n_in = _inlier_count(total, inlier_fraction)
    if n_in > n_points:
        raise ValueError(f"{n_in} correct matches requested but only {n_points} points exist.")
    chosen = rng.permutation(n_points)[:n_in]
    correct = np.column_stack([points[chosen], _observe(truth, points[chosen], noise_sigma_deg, rng, translation)])
    owners = rng.integers(0, n_points, total - n_in)
    decoys = np.column_stack([points[owners],
                              rng.uniform(-IMAGE_HALF_WIDTH, IMAGE_HALF_WIDTH, total - n_in),
                              rng.uniform(-IMAGE_HALF_HEIGHT, IMAGE_HALF_HEIGHT, total - n_in)])
    items, ids = _shuffle(rng, correct, decoys)
    return ProblemInstance(model_tag, items, d, smap, GroundTruth(truth.to_point(), ids), noise_sigma_deg, seed)


def generate_instance(model_tag, n, inlier_fraction, noise, seed, d=3, **options):
    """Dispatch to the generator of ``model_tag`` with the common sweep parameters.

    For posing models ``n`` is the number of scene points and ``noise`` is in
    degrees; ``options`` are passed on to the model's generator.
    """
    if model_tag == "line2":
        return gen_line_instance(n, inlier_fraction, noise, seed)
    if model_tag == "hyperplane":
        return gen_hyperplane_instance(n, d, inlier_fraction, noise, seed)
    if model_tag == "ray3":
        return gen_ray_instance(n, _inlier_count(n, inlier_fraction), seed)
    if model_tag == "sim2":
        return gen_alignment_instance(n, inlier_fraction, options.get("transform_bracket"), seed, noise)
    if model_tag in POSE_MODELS:
        matches = options.get("n_matches_per_point", 1)
        return gen_pose_instance(model_tag, n, matches, inlier_fraction, noise, seed,
                                 options.get("n_bearings"), options.get("rotation_bracket", ROTATION_BRACKET))
    raise UsageError(f"unknown model {model_tag!r}")


def brute_force_vote(surfaces, box, tol, family=None):
    """Reference grid scan: every cell of the epsilon-grid, every surface, no tricks.

    A surface counts for a cell when its value at the center of the cell's
    free coordinates lies within two cells of the cell center in every
    dependent coordinate.
    """
    surface_set = as_surface_set(surfaces, family)
    k = surface_set.family.k
    spacing = cell_sizes(box, tol)
    shape = tuple(2 ** grid_levels(box, tol))
    weights = surface_set.weights()
    best_count, best_index, best_members = 0, None, None
    for index in np.ndindex(*shape[:k]):
        center = box.min_corner[:k] + (np.array(index) + 0.5) * spacing[:k]
        values = surface_set.evaluate_unit(center[None, :])[:, 0, :]
        for dep_index in np.ndindex(*shape[k:]):
            cell = box.min_corner[k:] + (np.array(dep_index) + 0.5) * spacing[k:]
            with np.errstate(invalid="ignore"):
                members = np.all(np.abs(values - cell) <= 2 * spacing[k:] * (1 + 1e-12), axis=1)
            count = int(weights[members].sum())
            if count > best_count:
                best_count, best_index, best_members = count, index + dep_index, members
    if best_index is None:
        return VoteResult(box.center, 0, frozenset())
    point = box.min_corner + (np.array(best_index) + 0.5) * spacing
    inliers = frozenset(surface_set.ids[best_members[surface_set.labels]].tolist())
    return VoteResult(point, len(inliers), inliers)


def mean_scene_depth(instance):
    """Mean distance between the planted camera and the planted inlier points."""
    if instance.ground_truth is None:
        raise ValueError("instance has no planted pose")
    truth = PoseHypothesis.from_point(instance.model_tag, instance.ground_truth.point)
    ids = sorted(instance.ground_truth.inlier_ids) or list(range(instance.n))
    points = instance.items[ids, :3]
    if instance.model_tag == "radial5":
        camera = points @ truth.rotation().T + np.append(truth.translation()[:2], 0.0)
        return float(np.linalg.norm(camera[:, :2], axis=1).mean())
    return float(np.linalg.norm(points - truth.camera_center(), axis=1).mean())


def pose_error(estimate, truth, scene_depth=1.0):
    """Rotation error in radians and camera-center error relative to ``scene_depth``.

    The radial model only observes the in-plane translation, which is compared instead.
    """
    rotation = rotation_angle_between(estimate.rotation(), truth.rotation())
    if truth.model_tag == "radial5":
        shift = np.linalg.norm(estimate.translation()[:2] - truth.translation()[:2])
    else:
        shift = np.linalg.norm(estimate.camera_center() - truth.camera_center())
    return rotation, float(shift / scene_depth)


def planted_residuals(instance):
    """Unit-space residuals of the planted inliers against the planted point, shape (n_inliers, d - k)."""
    if instance.ground_truth is None:
        raise ValueError("instance has no ground truth")
    surface_set = surfaces_from_instance(instance)
    family = surface_set.family
    unit = family.space_map.to_unit(instance.ground_truth.point)
    values = surface_set.evaluate_unit(unit[None, :family.k])[:, 0, :]
    members = np.isin(surface_set.ids, sorted(instance.ground_truth.inlier_ids))
    return np.abs(values[surface_set.labels[members]] - unit[family.k:])
