# Adapted from https://github.com/nschloe/tikzplotlib/blob/450712b4014799ec5f151f234df84335c90f4b9d/tests/helpers.py

import re
from math import isclose

import numpy as np

import ivote
from ivote._bench import RunRecord, RunReport
from ivote._voting import OperationCounts


# https://stackoverflow.com/a/845432/353337
def _unidiff_output(expected, actual):
    import difflib

    expected = expected.splitlines(1)
    actual = actual.splitlines(1)
    diff = difflib.unified_diff(expected, actual)
    return "".join(diff)


def extract_floats_from_string(s):
    """Extract all floating-point numbers from a string."""
    float_pattern = re.compile(r"[-+]?\d*\.\d+(?:e[-+]?\d+)?|\d+(?:e[-+]?\d+)?")
    floats = [float(num) for num in float_pattern.findall(s)]
    return floats


def assert_equality(report, target_file, tolerance=1e-9, **kwargs):
    tikz_code = ivote.export_tex(report, include_disclaimer=False, **kwargs)

    with open(target_file, encoding="utf-8") as f:
        reference = f.read()

    reference_floats = extract_floats_from_string(reference)
    tikz_floats = extract_floats_from_string(tikz_code)

    if len(reference_floats) != len(tikz_floats):
        assert False, "Number of floats in the reference and tikz code differ.\n" + _unidiff_output(reference, tikz_code)

    for ref, tikz in zip(reference_floats, tikz_floats):
        if not isclose(ref, tikz, rel_tol=tolerance, abs_tol=tolerance):
            assert False, f"Values differ: {ref} vs {tikz}\n" + _unidiff_output(reference, tikz_code)

    # If all floating-point comparisons pass, ensure the structures are the same.
    reference_non_floats = re.sub(r"[-+]?\d*\.\d+(?:e[-+]?\d+)?|\d+(?:e[-+]?\d+)?", "FLOAT", reference)
    tikz_non_floats = re.sub(r"[-+]?\d*\.\d+(?:e[-+]?\d+)?|\d+(?:e[-+]?\d+)?", "FLOAT", tikz_code)

    assert reference_non_floats == tikz_non_floats, target_file + "\n" + _unidiff_output(reference, tikz_code)


def line_set(points):
    """SurfaceSet of the dual line surfaces of 2D points, ids in input order."""
    return ivote.SurfaceSet.from_surfaces([ivote.line_surface_from_point(p, i) for i, p in enumerate(points)])


def line_through(a, b, source_id=0):
    """Voting-space line ``x2 = a x1 + b`` as a line2 surface."""
    return ivote.ParametricSurface(2, 1, (float(a),), (float(b),), "line2", frozenset({source_id}))


def random_surface_set(model_tag, m, rng, d=3):
    """Surfaces induced by random items of a model, ids ``0..m-1``."""
    family = ivote.get_family(model_tag, d=d)
    if model_tag == "line2":
        items = rng.uniform(0.0, 1.0, (m, 2))
    elif model_tag == "hyperplane":
        items = rng.uniform(0.0, 1.0, (m, d))
    elif model_tag == "ray3":
        slopes = rng.uniform(-1.0, 1.0, (m, 2))
        items = np.column_stack([slopes[:, 0], rng.uniform(0.0, 1.0, m), slopes[:, 1], rng.uniform(0.0, 1.0, m)])
    elif model_tag == "sim2":
        angle = rng.uniform(-np.pi, np.pi, m)
        radius = rng.uniform(0.3, 1.0, m)
        items = np.column_stack([radius * np.cos(angle), radius * np.sin(angle), rng.uniform(-1.0, 1.0, (m, 2))])
    else:
        items = np.column_stack([rng.uniform(-10.0, 10.0, (m, 3)), rng.uniform(-0.8, 0.8, m), rng.uniform(-0.5, 0.5, m)])
        if model_tag == "radial5":
            items[:, 3] = np.where(np.abs(items[:, 3]) < 0.05, 0.5, items[:, 3])
    essential, free, _ = family.parameters_from_items(items)
    return ivote.SurfaceSet.from_arrays(family, essential, free)


def fake_record(algo, sweep_value, count, ops, model="line2", eps_min=0.01, inlier_fraction=0.1, repeat=0, wall_ms=1.0,
                point=(0.5, 0.5), inlier_ids=None):
    """RunRecord with given counters, for harness tests that need no real runs."""
    return RunRecord(
        sweep_value=float(sweep_value), algo=algo, model=model, eps_min=eps_min, count=count,
        ops=OperationCounts(**ops), wall_ms=wall_ms, truncated=False, inlier_fraction=inlier_fraction,
        repeat=repeat, seed=repeat, point=tuple(point), unit_point=tuple(point),
        inlier_ids=tuple(range(count)) if inlier_ids is None else tuple(inlier_ids),
    )


def fake_report(records, model="line2", sweep_axis="n"):
    return RunReport(model, sweep_axis, list(records))
