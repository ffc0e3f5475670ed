from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._interval import Interval

# (d, k, l) per model tag; hyperplane is checked as (d, d-1, d-1)
EXPECTED_DIMENSIONS = {
    "line2": (2, 1, 1),
    "pose5": (5, 3, 4),
    "pose6": (6, 4, 5),
    "pose7": (7, 5, 5),
    "radial5": (5, 4, 5),
    "ray3": (3, 1, 2),
    "sim2": (4, 2, 2),
}

_REGISTRY = {}


@dataclass(frozen=True, eq=False)
class SpaceMap:
    """Affine map between physical voting coordinates and the unit cube.

    Parameters
    ----------
    lower
        physical value mapped to 0 on each axis
    upper
        physical value mapped to 1 on each axis
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise ValueError("SpaceMap bounds must have equal length.")
        if np.any(~np.isfinite(lower)) or np.any(~np.isfinite(upper)) or np.any(upper <= lower):
            raise ValueError(f"SpaceMap needs finite bounds with lower < upper, got {lower} and {upper}.")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def identity(cls, d):
        return cls(np.zeros(d), np.ones(d))

    @property
    def d(self):
        return self.lower.size

    @property
    def span(self):
        return self.upper - self.lower

    def to_unit(self, point):
        return (np.asarray(point, dtype=float) - self.lower) / self.span

    def from_unit(self, point):
        return self.lower + np.asarray(point, dtype=float) * self.span

    def __eq__(self, other):
        if not isinstance(other, SpaceMap):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


@dataclass(frozen=True)
class ParametricSurface:
    """A single surface ``x_j = F_j(x; t) + f_j`` for the dependent coordinates.

    Parameters are stored in the physical units of the model family.
    """

    dim_ambient: int
    dim_surface: int
    essential_params: tuple
    free_params: tuple
    model_tag: str
    source_ids: frozenset = field(default_factory=frozenset)

    def evaluate(self, x, family=None):
        """Dependent coordinates at free coordinates ``x`` (physical units)."""
        family = family or get_family(self.model_tag, d=self.dim_ambient)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        values = family.dependent(x, np.asarray([self.essential_params], dtype=float))[0]
        return values + np.asarray(self.free_params, dtype=float)


class SurfaceFamily:
    """A model family reducing an application to the parametric surface form.

    Subclasses provide the physical-unit evaluation ``dependent`` and a sound
    interval enclosure ``dependent_bounds``; unit-cube evaluation and bounds
    are derived here through the family's :class:`SpaceMap`.

    Parameters
    ----------
    space_map, optional
        physical range of every voting axis, by default the family's
        ``default_space_map()``
    """

    tag = None
    d = None
    k = None
    ell = None
    axes = ()
    item_fields = ()
    # per-model default of the constant c in eps' = eps / (c log(1/eps)); None keeps the tolerance's
    eps_prime_scale = None
    # relative tolerance of denominators before a point counts as singular
    denominator_tol = 1e-6

    def __init__(self, space_map=None):
        self.space_map = space_map if space_map is not None else self.default_space_map()
        if self.space_map.d != self.d:
            raise ValueError(f"{self.tag}: space map has {self.space_map.d} axes, expected {self.d}.")

    def default_space_map(self):
        return SpaceMap.identity(self.d)

    @property
    def n_dependent(self):
        return self.d - self.k

    @property
    def item_width(self):
        return len(self.item_fields)

    def dependent(self, x, essential):
        """Physical dependent coordinates without the free offsets.

        Parameters
        ----------
        x
            free coordinates, shape (P, k)
        essential
            essential parameters, shape (m, l)

        Returns
        -------
            array of shape (m, P, d - k); NaN where the model is undefined
        """
        raise NotImplementedError

    def dependent_bounds(self, lower, upper, essential):
        """Interval enclosure of ``dependent`` over the box ``[lower, upper]`` of free coordinates.

        Returns
        -------
            Interval with arrays of shape (m, d - k)
        """
        raise NotImplementedError

    def parameters_from_items(self, items):
        """Essential and free parameters of the surfaces induced by input items."""
        raise NotImplementedError

    def evaluate_unit(self, u, essential, free):
        """Dependent coordinates in unit-cube units at unit free coordinates ``u`` (P, k)."""
        smap = self.space_map
        x = smap.lower[:self.k] + np.atleast_2d(u) * smap.span[:self.k]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            values = self.dependent(x, essential) + free[:, None, :]
        return (values - smap.lower[self.k:]) / smap.span[self.k:]

    def bounds_unit(self, lower, upper, essential, free):
        """Unit-cube interval of the dependent coordinates over a unit box of free coordinates."""
        smap = self.space_map
        lo = smap.lower[:self.k] + np.asarray(lower) * smap.span[:self.k]
        hi = smap.lower[:self.k] + np.asarray(upper) * smap.span[:self.k]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            bounds = self.dependent_bounds(lo, hi, essential)
        offset = free - smap.lower[self.k:]
        span = smap.span[self.k:]
        return Interval((bounds.lo + offset) / span, (bounds.hi + offset) / span)

    def signature(self):
        return self.d, self.k, self.ell

    def __repr__(self):
        return f"{type(self).__name__}(d={self.d}, k={self.k}, ell={self.ell})"


def register_family(cls):
    """Class decorator adding a family to the model registry.

    The (d, k, l) bookkeeping is asserted against the known table.
    """
    if cls.tag == "hyperplane":
        probe = cls()
        assert probe.signature() == (probe.d, probe.d - 1, probe.d - 1), f"hyperplane: bad signature {probe.signature()}"
    else:
        assert (cls.d, cls.k, cls.ell) == EXPECTED_DIMENSIONS[cls.tag], f"{cls.tag}: bad signature {(cls.d, cls.k, cls.ell)}"
        assert len(cls.axes) == cls.d, f"{cls.tag}: {len(cls.axes)} axis names for d={cls.d}"
    _REGISTRY[cls.tag] = cls
    return cls


def model_tags():
    return tuple(_REGISTRY)


def get_family(tag, d=None, space_map=None):
    """Instantiate the family registered under ``tag``.

    Parameters
    ----------
    tag
        model tag, one of :func:`model_tags`
    d, optional
        ambient dimension, only used by the hyperplane family
    space_map, optional
        physical axis ranges, by default the family's own

    Returns
    -------
        SurfaceFamily instance
    """
    if tag not in _REGISTRY:
        raise KeyError(f"Unknown model tag {tag!r}; expected one of {', '.join(_REGISTRY)}.")
    cls = _REGISTRY[tag]
    if tag == "hyperplane":
        d = d if d is not None else (space_map.d if space_map is not None else 3)
        return cls(d, space_map=space_map)
    return cls(space_map=space_map)


@dataclass(eq=False)
class SurfaceSet:
    """Vectorized bundle of surfaces sharing one family.

    ``ids`` lists the original input items still represented and ``labels[i]``
    is the surface currently standing for ``ids[i]``; merged surfaces therefore
    own several ids.
    """

    family: SurfaceFamily
    essential: np.ndarray
    free: np.ndarray
    ids: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_arrays(cls, family, essential, free, ids=None):
        essential = np.asarray(essential, dtype=float).reshape(-1, family.ell)
        free = np.asarray(free, dtype=float).reshape(-1, family.n_dependent)
        if essential.shape[0] != free.shape[0]:
            raise ValueError("essential and free parameters disagree on the number of surfaces.")
        m = essential.shape[0]
        ids = np.arange(m, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64).reshape(-1)
        if ids.size != m:
            raise ValueError(f"{ids.size} ids given for {m} surfaces.")
        return cls(family, essential, free, ids, np.arange(m, dtype=np.int64))

    @classmethod
    def from_surfaces(cls, surfaces, family=None):
        surfaces = list(surfaces)
        tags = {s.model_tag for s in surfaces}
        if len(tags) > 1:
            raise ValueError(f"Surfaces mix model tags {sorted(tags)}.")
        if family is None:
            if not surfaces:
                raise ValueError("An empty surface list needs an explicit family.")
            family = get_family(surfaces[0].model_tag, d=surfaces[0].dim_ambient)
        elif tags and tags != {family.tag}:
            raise ValueError(f"Surfaces of model {tags.pop()!r} given with family {family.tag!r}.")
        if any(s.dim_ambient != family.d or s.dim_surface != family.k for s in surfaces):
            raise ValueError(f"Surface dimensions disagree with family {family}.")
        essential = np.array([s.essential_params for s in surfaces], dtype=float).reshape(-1, family.ell)
        free = np.array([s.free_params for s in surfaces], dtype=float).reshape(-1, family.n_dependent)
        ids, labels = [], []
        for index, surface in enumerate(surfaces):
            members = sorted(surface.source_ids) if surface.source_ids else [index]
            ids.extend(members)
            labels.extend([index] * len(members))
        return cls(family, essential, free, np.asarray(ids, dtype=np.int64), np.asarray(labels, dtype=np.int64))

    def __len__(self):
        return self.essential.shape[0]

    @property
    def count(self):
        """Number of original items represented."""
        return int(self.ids.size)

    def weights(self):
        return np.bincount(self.labels, minlength=len(self))

    def subset(self, mask):
        """Keep the surfaces selected by a boolean mask, with their original ids."""
        mask = np.asarray(mask, dtype=bool)
        remap = np.cumsum(mask) - 1
        keep = mask[self.labels]
        return SurfaceSet(self.family, self.essential[mask], self.free[mask], self.ids[keep], remap[self.labels[keep]])

    def members(self, index):
        return frozenset(self.ids[self.labels == index].tolist())

    def surface(self, index):
        return ParametricSurface(
            self.family.d, self.family.k,
            tuple(self.essential[index].tolist()), tuple(self.free[index].tolist()),
            self.family.tag, self.members(index),
        )

    def to_surfaces(self):
        return [self.surface(i) for i in range(len(self))]

    def evaluate_unit(self, u):
        return self.family.evaluate_unit(u, self.essential, self.free)

    def bounds_unit(self, lower, upper):
        return self.family.bounds_unit(lower, upper, self.essential, self.free)


def as_surface_set(surfaces, family=None):
    """Accept a :class:`SurfaceSet` or a sequence of :class:`ParametricSurface`."""
    if isinstance(surfaces, SurfaceSet):
        if family is not None and family.tag != surfaces.family.tag:
            raise ValueError(f"Surface set of model {surfaces.family.tag!r} given with family {family.tag!r}.")
        return surfaces
    return SurfaceSet.from_surfaces(surfaces, family)
