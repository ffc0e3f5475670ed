from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from itertools import product
from warnings import warn

import numpy as np

from ._box import GRID_ATOL, cell_sizes, default_max_depth, grid_levels, subdivide
from ._canonize import canonize_set
from ._errors import UnsupportedModelError
from ._models import AffineFamily
from ._surface import as_surface_set

# upper bound on array entries held per chunk of naive voting
NAIVE_CHUNK_ENTRIES = 2 ** 22


@dataclass
class OperationCounts:
    """Dominant-operation counters of one run."""

    box_intersection_calls: int = 0
    surface_evaluations: int = 0
    cells_touched: int = 0
    solver_calls: int = 0

    def __add__(self, other):
        return OperationCounts(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class VoteResult:
    """Winning cell of a vote.

    Parameters
    ----------
    point
        cell center in unit-cube coordinates
    count
        number of original items voting for the cell
    inlier_ids
        identifiers of those items
    ops_counter
        operations spent
    truncated
        the recursion stopped before reaching the tolerance
    """

    point: np.ndarray
    count: int
    inlier_ids: frozenset
    ops_counter: OperationCounts = field(default_factory=OperationCounts)
    truncated: bool = False

    def __post_init__(self):
        if self.count != len(self.inlier_ids):
            raise ValueError(f"count {self.count} disagrees with {len(self.inlier_ids)} inlier ids.")

    def physical_point(self, family):
        return family.space_map.from_unit(self.point)

    def same_outcome(self, other):
        return (self.count == other.count and self.inlier_ids == other.inlier_ids
                and np.array_equal(self.point, other.point))


@dataclass(frozen=True)
class VotingConfig:
    """Tunables of :func:`generalized_vote`.

    Parameters
    ----------
    max_depth
        recursion cut-off, by default ``ceil(log2(1 / min eps)) + 2``
    threads
        workers searching the children of the root box
    canonize
        canonize surfaces at every box; off gives plain branch and bound
    prune
        skip children whose bound cannot beat the best cell found so far
    neighborhood
        dependent-coordinate slack in grid cells; 1.5 matches naive voting
    eps_prime_scale
        per-model-tag overrides of the constant ``c`` in ``eps'``
    """

    max_depth: int = None
    threads: int = 1
    canonize: bool = True
    prune: bool = True
    neighborhood: float = 1.5
    eps_prime_scale: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError(f"threads must be at least 1, got {self.threads}.")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError(f"max_depth must be non-negative, got {self.max_depth}.")
        if self.neighborhood < 0:
            raise ValueError(f"neighborhood must be non-negative, got {self.neighborhood}.")

    def canonization_tolerance(self, tol, family):
        scale = self.eps_prime_scale.get(family.tag, family.eps_prime_scale)
        return tol if scale is None else tol.with_scale(scale)


def _empty_result(box, ops=None):
    return VoteResult(box.center, 0, frozenset(), ops or OperationCounts())


def _prepare(surfaces, family):
    """SurfaceSet of the input, or None when there is nothing to vote with."""
    if isinstance(surfaces, (list, tuple)) and not surfaces:
        return None
    return as_surface_set(surfaces, family)


def _check_dimensions(surface_set, box, tol):
    d = surface_set.family.d
    if box.d != d or tol.d != d:
        raise ValueError(f"Model {surface_set.family.tag!r} has d={d}, got a {box.d}-d box and {tol.d} tolerances.")


def _intersect_mask(surface_set, box, slack):
    """Interval-bound filter: which surfaces may meet ``box`` expanded by ``slack``."""
    k = surface_set.family.k
    slack = np.broadcast_to(np.asarray(slack, dtype=float), (box.d,))
    lower = box.min_corner - slack
    upper = box.max_corner + slack
    if len(surface_set) == 0:
        return np.zeros(0, dtype=bool)
    bounds = surface_set.bounds_unit(lower[:k], upper[:k])
    return np.all(bounds.overlaps(lower[k:], upper[k:]), axis=1)


def intersects_box(surface, box, slack=0.0, family=None):
    """Conservative surface-box test: False only when the surface provably misses the expanded box.

    Parameters
    ----------
    surface
        a ParametricSurface
    box
        Box in unit-cube coordinates
    slack, optional
        non-negative expansion per coordinate, by default 0
    family, optional
        family instance carrying the space map, by default the registry default

    Returns
    -------
        bool
    """
    if np.any(np.asarray(slack) < 0):
        raise ValueError(f"slack must be non-negative, got {slack}.")
    surface_set = as_surface_set([surface], family)
    return bool(_intersect_mask(surface_set, box, slack)[0])


def intersects_box_exact(surface, box, slack=0.0, family=None):
    """Exact surface-box test for affine surfaces in up to three dimensions.

    A surface with one dependent coordinate attains its extremes over the box
    at vertices, so the range test is exact; a curve (``k = 1``) meets the box
    iff the parameter intervals cut out by each dependent slab overlap.
    """
    surface_set = as_surface_set([surface], family)
    family = surface_set.family
    if not isinstance(family, AffineFamily) or family.d > 3:
        raise UnsupportedModelError(f"exact intersection is only available for affine models with d <= 3, not {family.tag!r}")
    slack = np.broadcast_to(np.asarray(slack, dtype=float), (box.d,))
    lower, upper = box.min_corner - slack, box.max_corner + slack
    k = family.k
    smap = family.space_map
    coeffs = family.affine_coefficients(surface_set.essential)[0] * smap.span[:k] / smap.span[k:, None]
    offset = (family.dependent(smap.lower[None, :k], surface_set.essential)[0, 0] + surface_set.free[0] - smap.lower[k:]) / smap.span[k:]
    if family.n_dependent == 1:
        a = coeffs[0]
        lo = offset[0] + np.minimum(a * lower[:k], a * upper[:k]).sum()
        hi = offset[0] + np.maximum(a * lower[:k], a * upper[:k]).sum()
        return bool(hi >= lower[k] and lo <= upper[k])
    t_lo, t_hi = lower[0], upper[0]
    for j in range(family.n_dependent):
        a, b = coeffs[j, 0], offset[j]
        if abs(a) <= GRID_ATOL:
            if not lower[k + j] <= b <= upper[k + j]:
                return False
            continue
        ends = sorted(((lower[k + j] - b) / a, (upper[k + j] - b) / a))
        t_lo, t_hi = max(t_lo, ends[0]), min(t_hi, ends[1])
    return bool(t_lo <= t_hi)


def branchless_count_upper_bound(surfaces, box, slack=0.0, family=None):
    """Number of original items whose surface may intersect ``box``."""
    surface_set = as_surface_set(surfaces, family)
    mask = _intersect_mask(surface_set, box, slack)
    return int(surface_set.weights()[mask].sum())


def _vote_ranges(values, dep_min, spacing, dims):
    """Dependent-grid index ranges overlapped by ``value +- 1.5`` cells, clipped to the grid."""
    with np.errstate(invalid="ignore", over="ignore"):
        q = (values - dep_min) / spacing
        lo = np.ceil(q - 1.5 - GRID_ATOL) - 1
        hi = np.floor(q + 1.5 + GRID_ATOL)
    valid = np.all(np.isfinite(q), axis=-1)
    lo = np.where(np.isfinite(lo), np.maximum(lo, 0), 0)
    hi = np.where(np.isfinite(hi), np.minimum(hi, dims - 1), -1)
    valid &= np.all(lo <= hi, axis=-1)
    return lo.astype(np.int64), hi.astype(np.int64), valid


def _tally(values, weights, dep_min, spacing, dims):
    """Accumulate weighted votes of ``values`` (m, P, r) into counts of shape (P, *dims)."""
    m, n_cells, r = values.shape
    lo, hi, valid = _vote_ranges(values, dep_min, spacing, dims)
    surface_index, cell_index = np.nonzero(valid)
    lo, hi = lo[surface_index, cell_index], hi[surface_index, cell_index] + 1
    w = weights[surface_index].astype(float)
    touched = int(np.prod(hi - lo, axis=1).sum())
    shape = (n_cells, *(dims + 1))
    flat, signed = [], []
    for corner in product((0, 1), repeat=r):
        index = np.where(np.array(corner, dtype=bool), hi, lo)
        flat.append(np.ravel_multi_index((cell_index, *index.T), shape))
        signed.append(w if sum(corner) % 2 == 0 else -w)
    diff = np.bincount(np.concatenate(flat), weights=np.concatenate(signed), minlength=int(np.prod(shape)))
    diff = diff.reshape(shape)
    for axis in range(1, r + 1):
        diff = np.cumsum(diff, axis=axis)
    counts = diff[(slice(None),) + (slice(0, -1),) * r]
    return np.rint(counts).astype(np.int64), touched


def naive_vote(surfaces, box, tol, family=None):
    """Exhaustive voting over the epsilon-grid of ``box``.

    Every surface is evaluated at the center of each cell of the free
    coordinates and votes, at most once, for every dependent cell overlapped
    by its value widened by 1.5 cells in each dependent coordinate.

    Parameters
    ----------
    surfaces
        sequence of ParametricSurface sharing one model, or a SurfaceSet
    box
        query box in unit-cube coordinates
    tol
        Tolerance defining the grid
    family, optional
        family instance carrying the space map

    Returns
    -------
        VoteResult of the lexicographically first cell with the most votes
    """
    surface_set = _prepare(surfaces, family)
    if surface_set is None or surface_set.count == 0:
        return _empty_result(box)
    _check_dimensions(surface_set, box, tol)
    k, r = surface_set.family.k, surface_set.family.n_dependent
    levels = grid_levels(box, tol)
    spacing = cell_sizes(box, tol)
    n_per_axis = 2 ** levels
    free_cells, dims = n_per_axis[:k], n_per_axis[k:]
    n_free = int(np.prod(free_cells))
    weights = surface_set.weights()
    m = len(surface_set)
    chunk = max(1, NAIVE_CHUNK_ENTRIES // (m * r + int(np.prod(dims + 1))))

    ops = OperationCounts()
    best_count, best_cell = 0, None
    for start in range(0, n_free, chunk):
        cells = np.arange(start, min(start + chunk, n_free))
        centers = box.min_corner[:k] + (np.stack(np.unravel_index(cells, free_cells), axis=1) + 0.5) * spacing[:k]
        values = surface_set.evaluate_unit(centers)
        ops.surface_evaluations += m * cells.size
        counts, touched = _tally(values, weights, box.min_corner[k:], spacing[k:], dims)
        ops.cells_touched += touched
        top = int(np.argmax(counts))
        if counts.flat[top] > best_count:
            best_count = int(counts.flat[top])
            position = np.unravel_index(top, counts.shape)
            best_cell = (cells[position[0]], np.array(position[1:]))

    if best_cell is None:
        return _empty_result(box, ops)
    free_index = np.array(np.unravel_index(best_cell[0], free_cells))
    index = np.concatenate([free_index, best_cell[1]])
    point = box.min_corner + (index + 0.5) * spacing
    values = surface_set.evaluate_unit(point[None, :k])[:, 0, :]
    lo, hi, valid = _vote_ranges(values, box.min_corner[k:], spacing[k:], dims)
    members = valid & np.all((lo <= best_cell[1]) & (best_cell[1] <= hi), axis=1)
    inliers = frozenset(surface_set.ids[members[surface_set.labels]].tolist())
    return VoteResult(point, len(inliers), inliers, ops)


@dataclass
class _SearchState:
    count: int = 0
    residual: float = np.inf
    path: tuple = None
    point: np.ndarray = None
    inliers: frozenset = frozenset()
    truncated: bool = False
    cells: list = field(default_factory=list)
    ops: OperationCounts = field(default_factory=OperationCounts)

    def rank(self):
        return (-self.count, self.residual, self.path)

    def offer(self, count, residual, path, point, inliers):
        if count > 0 and (self.path is None or (-count, residual, path) < self.rank()):
            self.count, self.residual, self.path, self.point, self.inliers = count, residual, path, point, inliers

    def dominates(self, bound):
        return self.path is not None and bound < self.count


class _Search:
    """Depth-first best-first recursion of generalized voting over one tree of boxes.

    With ``min_count`` set, every leaf reaching that count is collected
    instead of keeping only the best one.
    """

    def __init__(self, root, tol, config, surface_set, max_depth, min_count=None):
        self.tol = tol
        self.config = config
        self.origin = root.min_corner
        self.spacing = cell_sizes(root, tol)
        self.dims = 2 ** grid_levels(root, tol)
        self.max_depth = max_depth
        self.min_count = min_count
        self.original = surface_set
        self._order = np.argsort(surface_set.ids, kind="stable")
        self._sorted_ids = surface_set.ids[self._order]

    def slack(self, k, allocation):
        slack = np.zeros(self.tol.d)
        slack[k:] = self.config.neighborhood * self.spacing[k:] + allocation
        return slack

    def split_axes(self, box):
        return [i for i in range(box.d) if box.sides[i] > self.tol.eps[i] * (1 + GRID_ATOL)]

    def cell_votes(self, surface_set, box, state):
        """Original items voting for the grid cell ``box`` the way naive voting counts them.

        Returns
        -------
            ``(ids, residual)``, the residual being the largest distance in grid
            cells between a voter and the cell center
        """
        family = surface_set.family
        k = family.k
        rows = self.original.labels[self._order[np.searchsorted(self._sorted_ids, surface_set.ids)]]
        values = family.evaluate_unit(box.center[None, :k], self.original.essential[rows], self.original.free[rows])[:, 0, :]
        state.ops.surface_evaluations += rows.size
        spacing, dep_min = self.spacing[k:], self.origin[k:]
        lo, hi, valid = _vote_ranges(values, dep_min, spacing, self.dims[k:])
        index = np.rint((box.min_corner[k:] - dep_min) / spacing).astype(np.int64)
        members = valid & np.all((lo <= index) & (index <= hi), axis=1)
        with np.errstate(invalid="ignore"):
            distance = np.max(np.abs(values[members] - box.center[k:]) / spacing, initial=0.0)
        return surface_set.ids[members], float(np.round(distance, 9))

    def expand(self, surface_set, box, allocation, state):
        """Canonize for ``box`` and filter the surfaces of every child.

        Returns
        -------
            children as ``(bound, octant, box, surfaces)``, best first, and the allocation spent so far
        """
        family = surface_set.family
        if self.config.canonize:
            ctol = self.config.canonization_tolerance(self.tol, family)
            surface_set, grid = canonize_set(surface_set, box, ctol)
            state.ops.surface_evaluations += grid.evaluations
            allocation = allocation + grid.allocation
        slack = self.slack(family.k, allocation)
        children = []
        for octant, child in enumerate(subdivide(box, self.split_axes(box))):
            mask = _intersect_mask(surface_set, child, slack)
            state.ops.box_intersection_calls += len(surface_set)
            subset = surface_set.subset(mask)
            children.append((subset.count, octant, child, subset))
        children.sort(key=lambda c: (-c[0], c[1]))
        return children, allocation

    def skip(self, bound, state):
        if bound == 0:
            return True
        if self.min_count is not None:
            return bound < self.min_count
        return self.config.prune and state.dominates(bound)

    def visit(self, surface_set, box, allocation, depth, path, state):
        if not self.split_axes(box) or depth >= self.max_depth:
            if self.split_axes(box):
                state.truncated = True
                ids, residual = surface_set.ids, np.inf
            else:
                ids, residual = self.cell_votes(surface_set, box, state)
            inliers = frozenset(ids.tolist())
            if self.min_count is not None:
                if len(inliers) >= self.min_count:
                    state.cells.append((path, box, inliers))
            else:
                state.offer(len(inliers), residual, path, box.center, inliers)
            return
        children, allocation = self.expand(surface_set, box, allocation, state)
        for bound, octant, child, subset in children:
            if self.skip(bound, state):
                continue
            self.visit(subset, child, allocation, depth + 1, path + (octant,), state)

    def run_child(self, task):
        subset, child, allocation, path = task
        state = _SearchState()
        self.visit(subset, child, allocation, len(path), path, state)
        return state


def _search(surfaces, box, tol, config, family, min_count=None):
    """Run the recursion from ``box``; None when no surface can meet it.

    Returns
    -------
        ``(root state, per-child states)``
    """
    surface_set = _prepare(surfaces, family)
    if surface_set is None or surface_set.count == 0:
        return None
    _check_dimensions(surface_set, box, tol)
    max_depth = config.max_depth if config.max_depth is not None else default_max_depth(tol)
    search = _Search(box, tol, config, surface_set, max_depth, min_count)
    k = surface_set.family.k

    root = _SearchState()
    allocation = np.zeros(surface_set.family.n_dependent)
    mask = _intersect_mask(surface_set, box, search.slack(k, allocation))
    root.ops.box_intersection_calls += len(surface_set)
    surface_set = surface_set.subset(mask)
    if surface_set.count == 0:
        return root, []
    if not search.split_axes(box) or max_depth == 0:
        search.visit(surface_set, box, allocation, 0, (), root)
        return root, []

    children, allocation = search.expand(surface_set, box, allocation, root)
    tasks = [(subset, child, allocation, (octant,)) for bound, octant, child, subset in children
             if not search.skip(bound, root)]
    if config.threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            states = list(pool.map(search.run_child, tasks))
    else:
        states = [search.run_child(task) for task in tasks]
    return root, states


def _warn_truncated(states):
    truncated = any(state.truncated for state in states)
    if truncated:
        warn("generalized voting stopped at the maximum depth before reaching the tolerance; raise max_depth for a full-resolution answer.")
    return truncated


def generalized_vote(surfaces, box, tol, config=None, family=None):
    """Recursive voting with canonization at every box.

    Boxes are halved along the axes still coarser than the tolerance until
    they coincide with cells of the naive grid. At each box the surviving
    surfaces are canonized, each child keeps the surfaces that may intersect
    it (expanded by 1.5 grid cells plus the canonization allocations along
    the path), and children are explored most promising first. At a leaf the
    original surfaces of the survivors are counted the way naive voting
    counts them.

    Parameters
    ----------
    surfaces
        sequence of ParametricSurface sharing one model, or a SurfaceSet
    box
        query box in unit-cube coordinates
    tol
        Tolerance defining the resolution
    config, optional
        VotingConfig, by default ``VotingConfig()``
    family, optional
        family instance carrying the space map

    Returns
    -------
        VoteResult; among cells with equal counts the one whose farthest voter
        passes closest to its center wins, then the first in octant order
    """
    config = config or VotingConfig()
    searched = _search(surfaces, box, tol, config, family)
    if searched is None:
        return _empty_result(box)
    root, states = searched
    ops = root.ops
    best = root
    for state in states:
        ops = ops + state.ops
        if state.path is not None and (best.path is None or state.rank() < best.rank()):
            best = state
    truncated = _warn_truncated([root, *states])
    if best.path is None:
        return VoteResult(box.center, 0, frozenset(), ops, truncated)
    return VoteResult(best.point, best.count, best.inliers, ops, truncated)


def report_cells(surfaces, box, tol, min_count, config=None, family=None):
    """Every grid cell of ``box`` voted for by at least ``min_count`` items.

    Runs the recursion of :func:`generalized_vote` but prunes only boxes
    whose bound falls below ``min_count``, so several consistent models
    (e.g. several camera hypotheses) are reported at once.

    Parameters
    ----------
    surfaces
        sequence of ParametricSurface sharing one model, or a SurfaceSet
    box
        query box in unit-cube coordinates
    tol
        Tolerance defining the resolution
    min_count
        smallest reported count, at least 1
    config, optional
        VotingConfig; its ``prune`` flag is ignored
    family, optional
        family instance carrying the space map

    Returns
    -------
        list of ``(cell box, inlier ids)``, highest count first, then in octant order
    """
    if min_count < 1:
        raise ValueError(f"min_count must be at least 1, got {min_count}.")
    config = config or VotingConfig()
    searched = _search(surfaces, box, tol, config, family, min_count)
    if searched is None:
        return []
    root, states = searched
    _warn_truncated([root, *states])
    cells = [cell for state in (root, *states) for cell in state.cells]
    cells.sort(key=lambda cell: (-len(cell[2]), cell[0]))
    return [(cell_box, inliers) for _, cell_box, inliers in cells]
