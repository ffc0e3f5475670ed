from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._errors import InstanceFormatError
from ._surface import SpaceMap, SurfaceSet, get_family

FORMAT_VERSION = "v1"
MAGIC = "IVOTE"


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Planted solution: a physical voting point and the planted inlier ids."""

    point: np.ndarray
    inlier_ids: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(-1))
        object.__setattr__(self, "inlier_ids", frozenset(int(i) for i in self.inlier_ids))

    def __eq__(self, other):
        if not isinstance(other, GroundTruth):
            return NotImplemented
        return np.array_equal(self.point, other.point) and self.inlier_ids == other.inlier_ids


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Serializable input of one consensus problem.

    Parameters
    ----------
    model_tag
        registered model tag
    items
        array of shape (n, item width), one row per input item; the row index is the item id
    d
        voting-space dimension
    space_map
        physical ranges of the voting axes
    ground_truth, optional
        planted solution, by default None
    noise_sigma, optional
        noise level used by the generator, by default 0
    seed, optional
        generator seed, by default None
    """

    model_tag: str
    items: np.ndarray
    d: int
    space_map: SpaceMap
    ground_truth: GroundTruth = None
    noise_sigma: float = 0.0
    seed: int = None

    def __post_init__(self):
        family = self.family()
        if family.d != self.d:
            raise ValueError(f"model {self.model_tag!r} has d={family.d}, got d={self.d}.")
        items = np.asarray(self.items, dtype=float).reshape(-1, family.item_width)
        object.__setattr__(self, "items", items)

    @property
    def n(self):
        return self.items.shape[0]

    def family(self):
        return get_family(self.model_tag, d=self.d, space_map=self.space_map)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (self.model_tag == other.model_tag and self.d == other.d
                and np.array_equal(self.items, other.items)
                and self.space_map == other.space_map
                and self.ground_truth == other.ground_truth
                and self.noise_sigma == other.noise_sigma and self.seed == other.seed)


def surfaces_from_instance(instance):
    """SurfaceSet of an instance; item ids are row indices, undefined items are skipped."""
    family = instance.family()
    essential, free, keep = family.parameters_from_items(instance.items)
    return SurfaceSet.from_arrays(family, essential, free, np.flatnonzero(keep))


def _format(values):
    return " ".join(repr(float(v)) for v in values)


def save_instance(instance, path):
    """Write an instance in the line-oriented ``IVOTE v1`` text format."""
    family = instance.family()
    lines = [
        f"{MAGIC} {FORMAT_VERSION} {instance.model_tag} d={instance.d}",
        f"# items: {' '.join(family.item_fields)}",
        f"# axes: {' '.join(family.axes)}",
    ]
    if instance.seed is not None:
        lines.append(f"SEED {int(instance.seed)}")
    lines.append(f"NOISE {float(instance.noise_sigma)!r}")
    bounds = np.column_stack([instance.space_map.lower, instance.space_map.upper]).reshape(-1)
    lines.append(f"MAP {_format(bounds)}")
    lines.append(f"ITEMS {instance.n}")
    lines.extend(_format(row) for row in instance.items)
    if instance.ground_truth is not None:
        ids = " ".join(str(i) for i in sorted(instance.ground_truth.inlier_ids))
        lines.append(f"GT {_format(instance.ground_truth.point)} INLIERS {ids}".rstrip())
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _floats(tokens, line_number, expected=None):
    if expected is not None and len(tokens) != expected:
        raise InstanceFormatError(f"expected {expected} values, found {len(tokens)}", line_number)
    try:
        values = [float(t) for t in tokens]
    except ValueError as e:
        raise InstanceFormatError(f"not a number: {e}", line_number) from e
    if not all(math.isfinite(v) for v in values):
        raise InstanceFormatError("non-finite value", line_number)
    return values


def _parse_header(line, line_number):
    tokens = line.split()
    if len(tokens) != 4 or tokens[0] != MAGIC or not tokens[3].startswith("d="):
        raise InstanceFormatError(f"expected header '{MAGIC} {FORMAT_VERSION} <model> d=<d>', found {line!r}", line_number)
    if tokens[1] != FORMAT_VERSION:
        raise InstanceFormatError(f"unsupported format version {tokens[1]!r}, expected {FORMAT_VERSION!r}", line_number)
    try:
        d = int(tokens[3][2:])
        family = get_family(tokens[2], d=d)
    except (KeyError, ValueError) as e:
        raise InstanceFormatError(str(e), line_number) from e
    if family.d != d:
        raise InstanceFormatError(f"model {tokens[2]!r} has d={family.d}, header says d={d}", line_number)
    return tokens[2], d, family


def load_instance(path):
    """Read an instance written by :func:`save_instance` or by hand.

    Raises
    ------
    InstanceFormatError
        on a version mismatch, a malformed or truncated record or a non-finite value
    """
    with open(path) as f:
        raw = f.read().splitlines()
    records = [(i + 1, line.split("#", 1)[0].strip()) for i, line in enumerate(raw)]
    records = [(n, line) for n, line in records if line]
    if not records:
        raise InstanceFormatError("empty file", 1)
    header_line, header = records[0]
    model_tag, d, family = _parse_header(header, header_line)

    seed, noise, space_map, ground_truth, items = None, 0.0, None, None, None
    position = 1
    while position < len(records):
        line_number, line = records[position]
        keyword, *tokens = line.split()
        position += 1
        if keyword == "SEED":
            if len(tokens) != 1 or not tokens[0].lstrip("-").isdigit():
                raise InstanceFormatError("SEED takes one integer", line_number)
            seed = int(tokens[0])
        elif keyword == "NOISE":
            noise = _floats(tokens, line_number, 1)[0]
        elif keyword == "MAP":
            bounds = np.array(_floats(tokens, line_number, 2 * d)).reshape(d, 2)
            try:
                space_map = SpaceMap(bounds[:, 0], bounds[:, 1])
            except ValueError as e:
                raise InstanceFormatError(str(e), line_number) from e
        elif keyword == "ITEMS":
            if len(tokens) != 1 or not tokens[0].isdigit():
                raise InstanceFormatError("ITEMS takes one non-negative integer", line_number)
            count = int(tokens[0])
            rows = []
            for _ in range(count):
                if position >= len(records):
                    raise InstanceFormatError(f"truncated: {count} items declared, {len(rows)} found", len(raw) + 1)
                row_number, row = records[position]
                rows.append(_floats(row.split(), row_number, family.item_width))
                position += 1
            items = np.array(rows, dtype=float).reshape(count, family.item_width)
        elif keyword == "GT":
            if "INLIERS" not in tokens:
                raise InstanceFormatError("GT record lacks INLIERS", line_number)
            split = tokens.index("INLIERS")
            point = _floats(tokens[:split], line_number, d)
            if not all(t.isdigit() for t in tokens[split + 1:]):
                raise InstanceFormatError("inlier ids must be non-negative integers", line_number)
            ground_truth = GroundTruth(point, frozenset(int(t) for t in tokens[split + 1:]))
        else:
            raise InstanceFormatError(f"unknown record {keyword!r}", line_number)
    if items is None:
        raise InstanceFormatError("missing ITEMS record", len(raw) + 1)
    return ProblemInstance(model_tag, items, d, space_map or family.space_map, ground_truth, noise, seed)
