from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ._surface import SurfaceSet, as_surface_set

# relative step of the finite differences used to estimate parameter sensitivity
SENSITIVITY_STEP = 1e-6
# decimals kept before rounding, so that decimal ties such as 0.35 / 0.1 resolve upwards
_TIE_DECIMALS = 9


def round_to_step(value, step):
    """Nearest integer multiple of ``step``; exact halfway ties round toward +inf.

    Parameters
    ----------
    value
        scalar or array
    step
        positive scalar or array broadcastable against ``value``

    Returns
    -------
        rounded value(s), a float for scalar input
    """
    step = np.asarray(step, dtype=float)
    if np.any(~(step > 0)):
        raise ValueError(f"Rounding step must be positive, got {step}.")
    quotient = np.round(np.asarray(value, dtype=float) / step, _TIE_DECIMALS)
    rounded = step * np.floor(quotient + 0.5) + 0.0
    return float(rounded) if rounded.ndim == 0 else rounded


def face_lattice(lower, upper):
    """Sample points of the box ``[lower, upper]`` used to bound deviations.

    Three points per axis (ends and midpoint) up to three axes; above that the
    ``2**k`` corners plus the center.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    k = lower.size
    if k <= 3:
        levels = np.array([0.0, 0.5, 1.0])
        weights = np.array(list(product(levels, repeat=k)))
    else:
        weights = np.vstack([np.array(list(product([0.0, 1.0], repeat=k))), np.full((1, k), 0.5)])
    return lower + weights * (upper - lower)


@dataclass(frozen=True)
class CanonicalGrid:
    """Rounding grid of one canonization.

    Parameters
    ----------
    essential_step
        step per essential parameter, in the family's parameter units
    free_step
        step per dependent coordinate, in unit-cube coordinates
    allocation
        deviation budget per dependent coordinate granted to this canonization
    essential_extent
        spread of the rounded essential parameters
    free_extent
        spread of the rounded free parameters
    n_unrounded
        surfaces kept with their original parameters
    evaluations
        surface evaluations spent
    """

    essential_step: np.ndarray
    free_step: np.ndarray
    allocation: np.ndarray
    essential_extent: np.ndarray
    free_extent: np.ndarray
    n_unrounded: int
    evaluations: int

    @property
    def count_bound(self):
        """Upper bound on the number of distinct canonical surfaces.

        Counts the grid nodes inside the extent of the rounded parameters,
        which depends on the box and the tolerance but not on the number of
        input surfaces, plus the surfaces left unrounded.
        """
        cells = 1
        for extent, step in zip(np.concatenate([self.essential_extent, self.free_extent]),
                                np.concatenate([self.essential_step, self.free_step])):
            cells *= int(np.floor(extent / step + 1e-9)) + 1
        return cells + self.n_unrounded


def canonize_set(surface_set, box, tol):
    """Canonize a :class:`SurfaceSet` for ``box``.

    Essential parameters are rounded on a grid scaled by their sensitivity
    over the box, free parameters are re-fit at the box center and rounded on
    a grid anchored at the box's min corner, every representative is checked
    against the allocation ``eps'/2`` on a lattice of the box and reverted if
    it strays, and identical representatives are merged.

    Returns
    -------
        ``(canonical_set, grid)``
    """
    family = surface_set.family
    k, ell, n_dep = family.k, family.ell, family.n_dependent
    eps_prime = tol.eps_prime[k:]
    allocation = 0.5 * eps_prime
    m = len(surface_set)
    if m == 0:
        grid = CanonicalGrid(np.full(ell, np.inf), eps_prime / (ell + 1), allocation, np.zeros(ell), np.zeros(n_dep), 0, 0)
        return surface_set, grid

    lower, upper = box.min_corner[:k], box.max_corner[:k]
    lattice = face_lattice(lower, upper)
    essential, free = surface_set.essential, surface_set.free
    base = surface_set.evaluate_unit(lattice)
    bounds = surface_set.bounds_unit(lower, upper)
    frozen = np.any(~np.isfinite(base), axis=(1, 2)) | ~np.all(bounds.is_bounded(), axis=1)

    # sensitivity of every dependent coordinate to each essential parameter, varied over the box
    slopes = []
    for i in range(ell):
        h = SENSITIVITY_STEP * max(1.0, float(np.max(np.abs(essential[:, i]))))
        shifted = essential.copy()
        shifted[:, i] += h
        with np.errstate(invalid="ignore"):
            slope = (family.evaluate_unit(lattice, shifted, free) - base) / h
        frozen |= np.any(~np.isfinite(slope), axis=(1, 2))
        slopes.append(slope)
    active = ~frozen
    variation = np.zeros((ell, n_dep))
    if active.any():
        for i, slope in enumerate(slopes):
            variation[i] = np.max(slope[active].max(axis=1) - slope[active].min(axis=1), axis=0)
    essential_step = np.min(eps_prime / ((ell + 1) * np.maximum(variation, 1e-12)), axis=1)
    essential_step = np.where(np.isfinite(essential_step) & (essential_step > 0), essential_step, np.inf)
    free_step = eps_prime / (ell + 1)

    rounded = essential.copy()
    roundable = np.isfinite(essential_step)
    rounded[:, roundable] = round_to_step(essential[:, roundable], essential_step[roundable])

    smap = family.space_map
    dep_lo, dep_span = smap.lower[k:], smap.span[k:]
    center = smap.lower[:k] + box.center[:k] * smap.span[:k]
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        refit = free + family.dependent(center[None, :], essential)[:, 0] - family.dependent(center[None, :], rounded)[:, 0]
    anchor = box.min_corner[k:]
    unit_free = (refit - dep_lo) / dep_span - anchor
    new_free = dep_lo + (anchor + round_to_step(np.nan_to_num(unit_free), free_step)) * dep_span

    candidate = family.evaluate_unit(lattice, rounded, new_free)
    with np.errstate(invalid="ignore"):
        deviation = np.max(np.abs(candidate - base), axis=1)
        accepted = active & np.all(deviation <= allocation * (1 + 1e-9), axis=1)
    final_essential = np.where(accepted[:, None], rounded, essential)
    final_free = np.where(accepted[:, None], new_free, free)

    rows = np.hstack([final_essential, final_free])
    unique_rows, inverse = np.unique(rows, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    merged = SurfaceSet(family, unique_rows[:, :ell].copy(), unique_rows[:, ell:].copy(),
                        surface_set.ids, inverse[surface_set.labels])

    if accepted.any():
        essential_extent = np.ptp(final_essential[accepted], axis=0)
        free_extent = np.ptp(((final_free[accepted] - dep_lo) / dep_span), axis=0)
    else:
        essential_extent, free_extent = np.zeros(ell), np.zeros(n_dep)
    n_unrounded = int(np.unique(rows[~accepted], axis=0).shape[0]) if (~accepted).any() else 0
    grid = CanonicalGrid(
        essential_step, free_step, allocation,
        np.where(roundable, essential_extent, 0.0), free_extent, n_unrounded,
        evaluations=m * lattice.shape[0] * (ell + 2),
    )
    return merged, grid


def canonize(surfaces, box, tol, return_grid=False):
    """Canonize surfaces for ``box`` and merge those that become identical.

    Parameters
    ----------
    surfaces
        sequence of ParametricSurface sharing one model, or a SurfaceSet
    box
        the box the canonical representatives must stay faithful on
    tol
        Tolerance over all ``d`` coordinates
    return_grid, optional
        also return the CanonicalGrid, by default False

    Returns
    -------
        canonical surfaces in the input's container type (list or SurfaceSet),
        and the grid when ``return_grid`` is set
    """
    as_list = not isinstance(surfaces, SurfaceSet)
    surface_set = as_surface_set(surfaces)
    if tol.d != surface_set.family.d:
        raise ValueError(f"Tolerance has {tol.d} coordinates but model {surface_set.family.tag!r} has d={surface_set.family.d}.")
    merged, grid = canonize_set(surface_set, box, tol)
    result = merged.to_surfaces() if as_list else merged
    return (result, grid) if return_grid else result
