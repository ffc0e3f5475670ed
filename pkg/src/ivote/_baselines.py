from __future__ import annotations

import math
from dataclasses import dataclass, replace
from warnings import warn

import numpy as np

from ._box import Tolerance
from ._errors import UnsupportedModelError, UsageError
from ._instance import surfaces_from_instance
from ._voting import OperationCounts, VoteResult, VotingConfig, generalized_vote

# samples whose design matrix is closer to singular than this are rejected
DEGENERACY_TOL = 1e-12
# upper bound on the entries of one batch of hypothesis scores
SCORE_CHUNK_ENTRIES = 2 ** 22


def ransac_iterations(b, k_min, confidence, max_iterations=10 ** 7):
    """Smallest ``N`` with ``1 - (1 - b**k_min)**N >= confidence``.

    Parameters
    ----------
    b
        lower bound on the inlier fraction, in (0, 1]
    k_min
        minimal sample size
    confidence
        required probability of drawing one all-inlier sample, in (0, 1)
    max_iterations, optional
        cap returned when the success probability underflows, by default 10**7

    Returns
    -------
        iteration count
    """
    if not 0 < b <= 1:
        raise ValueError(f"inlier bound must lie in (0, 1], got {b}.")
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}.")
    if k_min < 1:
        raise ValueError(f"minimal sample size must be positive, got {k_min}.")
    if b >= 1:
        return 1
    p = b ** k_min
    log_miss = math.log1p(-p)
    if p == 0 or log_miss == 0:
        warn(f"success probability {b}**{k_min} underflows; using {max_iterations} iterations.")
        return max_iterations
    n = max(1, math.ceil(math.log(1 - confidence) / log_miss))
    while n > 1 and 1 - math.exp((n - 1) * log_miss) >= confidence:
        n -= 1
    while 1 - math.exp(n * log_miss) < confidence:
        n += 1
    if n > max_iterations:
        warn(f"{n} iterations needed; capped at {max_iterations}.")
        return max_iterations
    return n


def _line2_solver(samples, context):
    (p1, p2), (q1, q2) = samples[:, 0].T, samples[:, 1].T
    run = q1 - p1
    valid = np.abs(run) > DEGENERACY_TOL
    slope = np.where(valid, q2 - p2, 0.0) / np.where(valid, run, 1.0)
    return np.stack([slope, p2 - slope * p1], axis=1), valid


def _hyperplane_solver(samples, context):
    design = np.concatenate([samples[:, :, :-1], np.ones(samples.shape[:2] + (1,))], axis=2)
    det = np.linalg.det(design)
    valid = np.abs(det) > DEGENERACY_TOL
    design[~valid] = np.eye(design.shape[1])
    coeffs = np.linalg.solve(design, samples[:, :, -1:])[..., 0]
    return coeffs, valid


def _ray3_solver(samples, context):
    a, b, c, d = (samples[:, :, i] for i in range(4))
    origin = np.stack([np.zeros_like(b), b, d], axis=2)
    direction = np.stack([np.ones_like(a), a, c], axis=2)
    u, v = direction[:, 0], direction[:, 1]
    w0 = origin[:, 0] - origin[:, 1]
    uu, uv, vv = (u * u).sum(1), (u * v).sum(1), (v * v).sum(1)
    uw, vw = (u * w0).sum(1), (v * w0).sum(1)
    den = uu * vv - uv ** 2
    valid = den > DEGENERACY_TOL * uu * vv
    den = np.where(valid, den, 1.0)
    s = (uv * vw - vv * uw) / den
    t = (uu * vw - uv * uw) / den
    midpoint = 0.5 * (origin[:, 0] + s[:, None] * u + origin[:, 1] + t[:, None] * v)
    return midpoint, valid


def _sim2_solver(samples, context):
    p, q = samples[:, :, :2], samples[:, :, 2:]
    dp, dq = p[:, 1] - p[:, 0], q[:, 1] - q[:, 0]
    norm2 = (dp ** 2).sum(1)
    valid = norm2 > DEGENERACY_TOL
    norm2 = np.where(valid, norm2, 1.0)
    a = (dp * dq).sum(1) / norm2
    b = (dp[:, 1] * dq[:, 0] - dp[:, 0] * dq[:, 1]) / norm2
    px, py = p[:, 0, 0], p[:, 0, 1]
    c = q[:, 0, 0] - a * px - b * py
    d = q[:, 0, 1] + b * px - a * py
    return np.stack([c, d, a, b], axis=1), valid


def _pose5_solver(samples, context):
    """Three-point gravity-aligned resection with known focal factor.

    With ``s_i = xi_i f`` each match gives the linear constraint
    ``cos(theta) (w2 - s w1) - sin(theta) (w1 + s w2) + V + s U = 0`` in
    ``(cos, sin, U, V)``; the null space fixes the heading and
    ``x = c U + s V``, ``y = s U - c V``. The camera height is the mean of the
    per-match heights, and samples whose heights spread beyond the vertical
    tolerance are rejected before scoring.
    """
    focal, vertical_tol = context["focal"], context["vertical_tol"]
    w1, w2, w3, xi, eta = (samples[:, :, i] for i in range(5))
    s = xi * focal
    design = np.stack([w2 - s * w1, -(w1 + s * w2), s, np.ones_like(s)], axis=2)
    _, singular, vh = np.linalg.svd(design)
    null = vh[:, -1, :]
    norm = np.hypot(null[:, 0], null[:, 1])
    valid = (singular[:, -1] > DEGENERACY_TOL * np.maximum(singular[:, 0], 1.0)) & (norm > DEGENERACY_TOL)
    null = null / np.where(valid, norm, 1.0)[:, None]
    cos, sin, u, v = null.T
    x = cos * u + sin * v
    y = sin * u - cos * v
    forward = cos[:, None] * (w1 - x[:, None]) + sin[:, None] * (w2 - y[:, None])
    flip = np.sum(forward > 0, axis=1) < 2
    # the null vector is defined up to sign, which turns the heading by pi but keeps (x, y)
    cos, sin = np.where(flip, -cos, cos), np.where(flip, -sin, sin)
    heights = w3 - eta * focal * np.hypot(w1 - x[:, None], w2 - y[:, None])
    valid &= np.ptp(heights, axis=1) <= vertical_tol
    valid &= np.abs(cos) > DEGENERACY_TOL
    kappa = sin / np.where(np.abs(cos) > DEGENERACY_TOL, cos, 1.0)
    z = heights.mean(axis=1)
    return np.stack([x, y, np.full_like(x, focal), z, kappa], axis=1), valid


MINIMAL_SOLVERS = {
    "line2": _line2_solver,
    "hyperplane": _hyperplane_solver,
    "pose5": _pose5_solver,
    "ray3": _ray3_solver,
    "sim2": _sim2_solver,
}


def minimal_sample_size(model_tag, d=None):
    if model_tag not in MINIMAL_SOLVERS:
        raise UnsupportedModelError(f"no minimal solver for model {model_tag!r}; RANSAC supports {', '.join(MINIMAL_SOLVERS)}")
    if model_tag == "hyperplane":
        return d
    return {"line2": 2, "pose5": 3, "ray3": 2, "sim2": 2}[model_tag]


@dataclass(frozen=True)
class RansacConfig:
    """Parameters of :func:`ransac_fit`.

    Parameters
    ----------
    inlier_bound
        assumed lower bound ``b`` on the inlier fraction
    confidence
        probability of drawing at least one all-inlier sample
    eps
        inlier threshold per voting coordinate in unit-cube coordinates, a
        scalar or a Tolerance; the same tolerance voting uses
    seed
        seed of the sampling generator
    max_iterations
        iteration cap
    batch_size
        hypotheses generated and scored together
    focal
        known focal factor for pose5, by default the planted one
    """

    inlier_bound: float = 0.5
    confidence: float = 0.99
    eps: object = 0.01
    seed: int = 0
    max_iterations: int = 10 ** 7
    batch_size: int = 1024
    focal: float = None


def _score(surface_set, hypotheses_unit, eps):
    """Inlier masks (B, m) of unit-space hypotheses against a surface set."""
    k = surface_set.family.k
    values = surface_set.evaluate_unit(hypotheses_unit[:, :k])
    residual = np.abs(values - hypotheses_unit[None, :, k:])
    with np.errstate(invalid="ignore"):
        return np.all(residual <= eps[k:] * (1 + 1e-12), axis=2).T


def ransac_fit(instance, model_tag=None, config=None):
    """Sample minimal sets, solve, and keep the hypothesis with the most inliers.

    Parameters
    ----------
    instance
        ProblemInstance to fit
    model_tag, optional
        must match the instance's model when given
    config, optional
        RansacConfig, by default ``RansacConfig()``

    Returns
    -------
        VoteResult whose point is the best hypothesis in unit-cube coordinates
    """
    config = config or RansacConfig()
    model_tag = model_tag or instance.model_tag
    if model_tag != instance.model_tag:
        raise UsageError(f"instance holds {instance.model_tag!r} items, not {model_tag!r}")
    k_min = minimal_sample_size(model_tag, instance.d)
    solver = MINIMAL_SOLVERS[model_tag]
    surface_set = surfaces_from_instance(instance)
    family = surface_set.family
    eps = config.eps if isinstance(config.eps, Tolerance) else Tolerance.uniform(config.eps, family.d)
    if eps.d != family.d:
        raise ValueError(f"Tolerance has {eps.d} coordinates but model {model_tag!r} has d={family.d}.")
    items = instance.items[surface_set.ids]
    n = items.shape[0]
    if n < k_min:
        raise ValueError(f"{model_tag} needs at least {k_min} items, got {n}.")

    context = {}
    if model_tag == "pose5":
        focal = config.focal
        if focal is None:
            if instance.ground_truth is None:
                raise UsageError("pose5 RANSAC needs a known focal factor")
            focal = float(instance.ground_truth.point[2])
        z_axis = family.axes.index("z")
        # vertical consistency check: the three heights agree within four tolerances
        context = {"focal": focal, "vertical_tol": 4 * eps.eps[z_axis] * family.space_map.span[z_axis]}

    iterations = ransac_iterations(config.inlier_bound, k_min, config.confidence, config.max_iterations)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    ops = OperationCounts()
    weights = surface_set.weights()
    best_count, best_point, best_mask = -1, None, None
    done = 0
    while done < iterations:
        batch = min(config.batch_size, iterations - done)
        done += batch
        picks = rng.integers(0, n, size=(batch, k_min))
        ops.solver_calls += batch
        distinct = np.all(np.diff(np.sort(picks, axis=1), axis=1) > 0, axis=1)
        hypotheses, valid = solver(items[picks], context)
        valid &= distinct & np.all(np.isfinite(hypotheses), axis=1)
        hypotheses = hypotheses[valid]
        if hypotheses.shape[0] == 0:
            continue
        unit = family.space_map.to_unit(hypotheses)
        step = max(1, SCORE_CHUNK_ENTRIES // max(1, len(surface_set) * family.n_dependent))
        for start in range(0, unit.shape[0], step):
            chunk = unit[start:start + step]
            masks = _score(surface_set, chunk, eps.eps)
            ops.surface_evaluations += chunk.shape[0] * len(surface_set)
            counts = masks.astype(np.int64) @ weights
            top = int(np.argmax(counts))
            if counts[top] > best_count:
                best_count, best_point, best_mask = int(counts[top]), chunk[top], masks[top]

    if best_point is None:
        empty = np.full(family.d, 0.5)
        return VoteResult(empty, 0, frozenset(), ops)
    inliers = frozenset(surface_set.ids[best_mask[surface_set.labels]].tolist())
    return VoteResult(best_point, len(inliers), inliers, ops)


def branch_and_bound(surfaces, box, tol, config=None, family=None):
    """Generalized voting without canonization, pruned by the intersection-count bound."""
    config = replace(config or VotingConfig(), canonize=False, prune=True)
    return generalized_vote(surfaces, box, tol, config, family)
