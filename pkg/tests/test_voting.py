import numpy as np
import pytest

import ivote
from ivote import (
    Box,
    Tolerance,
    VotingConfig,
    branchless_count_upper_bound,
    brute_force_vote,
    generalized_vote,
    intersects_box,
    intersects_box_exact,
    naive_vote,
    report_cells,
)
from ivote._box import cell_sizes

from .helpers import line_set, line_through, random_surface_set

ALL_MODELS = ["line2", "hyperplane", "ray3", "sim2", "pose5", "pose6", "pose7", "radial5"]


def _random_box(rng, d, min_side=0.05):
    sides = rng.uniform(min_side, 1.0, d)
    lower = rng.uniform(0.0, 1.0 - sides)
    return Box(lower, lower + sides)


@pytest.mark.parametrize("a, b, expected", [
    (0.0, 0.5, True),
    (0.0, 2.0, False),
    (-4.0, 2.0, True),
])
def test_intersects_box_examples(a, b, expected):
    surface = line_through(a, b)
    assert intersects_box(surface, Box.unit(2)) is expected
    assert intersects_box_exact(surface, Box.unit(2)) is expected


def test_intersects_box_slack():
    surface = line_through(0.0, 1.05)
    assert not intersects_box(surface, Box.unit(2))
    assert intersects_box(surface, Box.unit(2), slack=0.1)
    with pytest.raises(ValueError):
        intersects_box(surface, Box.unit(2), slack=-0.1)


def test_exact_predicate_rejects_pose_models():
    surface = random_surface_set("pose6", 1, np.random.default_rng(0)).surface(0)
    with pytest.raises(ivote.UnsupportedModelError):
        intersects_box_exact(surface, Box.unit(6))


@pytest.mark.parametrize("model_tag", ["line2", "hyperplane", "ray3"])
def test_interval_predicate_covers_exact(model_tag):
    rng = np.random.default_rng(4)
    surface_set = random_surface_set(model_tag, 60, rng)
    family = surface_set.family
    for _ in range(20):
        box = _random_box(rng, family.d)
        for i in range(len(surface_set)):
            surface = surface_set.surface(i)
            exact = intersects_box_exact(surface, box)
            interval = intersects_box(surface, box)
            assert interval or not exact
            if family.n_dependent == 1:
                assert interval == exact


@pytest.mark.parametrize("model_tag", ALL_MODELS)
def test_intersects_box_no_false_negatives(model_tag):
    rng = np.random.default_rng(9)
    surface_set = random_surface_set(model_tag, 40, rng)
    family = surface_set.family
    k = family.k
    for _ in range(10):
        box = _random_box(rng, family.d, min_side=0.2)
        samples = box.min_corner[:k] + rng.uniform(size=(1000, k)) * box.sides[:k]
        values = surface_set.evaluate_unit(samples)
        with np.errstate(invalid="ignore"):
            inside = np.all((values >= box.min_corner[k:]) & (values <= box.max_corner[k:]), axis=2).any(axis=1)
        mask = [intersects_box(surface_set.surface(i), box) for i in range(len(surface_set))]
        assert np.all(np.asarray(mask)[inside])


def test_branchless_count_upper_bound():
    box = Box.unit(2)
    missing = [line_through(0.0, 2.0 + i, i) for i in range(5)]
    hitting = [line_through(0.1 * i, 0.2, i) for i in range(5)]
    assert branchless_count_upper_bound(missing, box) == 0
    assert branchless_count_upper_bound(hitting, box) == 5

    rng = np.random.default_rng(1)
    surface_set = random_surface_set("ray3", 100, rng)
    box = _random_box(rng, 3)
    expected = sum(intersects_box(surface_set.surface(i), box) for i in range(len(surface_set)))
    assert branchless_count_upper_bound(surface_set, box) == expected


def test_naive_identical_lines():
    surfaces = [line_through(0.3, 0.4, i) for i in range(3)]
    result = naive_vote(surfaces, Box.unit(2), Tolerance.uniform(0.1, 2))
    assert result.count == 3
    assert result.inlier_ids == frozenset({0, 1, 2})


def test_naive_crossing_lines():
    surfaces = [line_through(1.0, 0.0, 0), line_through(-1.0, 1.0, 1)]
    result = naive_vote(surfaces, Box.unit(2), Tolerance.uniform(0.1, 2))
    assert result.count == 2
    assert np.all(np.abs(result.point - 0.5) <= 0.1)


def test_empty_input():
    box = Box.unit(2)
    tol = Tolerance.uniform(0.1, 2)
    for vote in (naive_vote, generalized_vote):
        result = vote([], box, tol)
        assert result.count == 0
        assert result.inlier_ids == frozenset()
        np.testing.assert_array_equal(result.point, box.center)


@pytest.mark.parametrize("model_tag, d, eps", [
    ("line2", 2, 0.05),
    ("hyperplane", 2, 0.05),
    ("hyperplane", 3, 0.15),
    ("ray3", 3, 0.15),
])
def test_naive_matches_brute_force(model_tag, d, eps):
    rng = np.random.default_rng(17)
    tol = Tolerance.uniform(eps, d)
    for _ in range(10):
        surface_set = random_surface_set(model_tag, int(rng.integers(1, 120)), rng, d=d)
        box = Box.unit(d)
        naive = naive_vote(surface_set, box, tol)
        brute = brute_force_vote(surface_set, box, tol)
        assert naive.same_outcome(brute)


@pytest.mark.parametrize("model_tag, d, eps", [
    ("line2", 2, 0.05),
    ("hyperplane", 3, 0.15),
    ("ray3", 3, 0.15),
])
def test_generalized_vote_dominates_naive(model_tag, d, eps):
    rng = np.random.default_rng(23)
    tol = Tolerance.uniform(eps, d)
    for _ in range(10):
        surface_set = random_surface_set(model_tag, int(rng.integers(1, 120)), rng, d=d)
        box = Box.unit(d)
        naive = naive_vote(surface_set, box, tol)
        general = generalized_vote(surface_set, box, tol)
        assert general.count >= naive.count
        assert box.contains(general.point)
        assert not general.truncated


@pytest.mark.parametrize("a, b", [(0.3, 0.4), (0.5, 0.2), (0.0, 0.3), (0.3, 0.6), (-0.4, 0.7), (0.1, 0.45)])
def test_generalized_identical_lines(a, b):
    surfaces = [line_through(a, b, i) for i in range(3)]
    result = generalized_vote(surfaces, Box.unit(2), Tolerance.uniform(0.1, 2))
    assert result.count == 3
    assert abs(result.point[1] - (a * result.point[0] + b)) <= 0.1


@pytest.mark.parametrize("model_tag, d, eps", [("line2", 2, 0.05), ("hyperplane", 3, 0.1), ("ray3", 3, 0.1)])
def test_generalized_count_matches_naive(model_tag, d, eps):
    rng = np.random.default_rng(31)
    tol = Tolerance.uniform(eps, d)
    box = Box.unit(d)
    for _ in range(10):
        surface_set = random_surface_set(model_tag, int(rng.integers(5, 150)), rng, d=d)
        naive = naive_vote(surface_set, box, tol)
        general = generalized_vote(surface_set, box, tol)
        assert general.count == naive.count
        cell = Box(general.point - cell_sizes(box, tol) / 2, general.point + cell_sizes(box, tol) / 2)
        assert general.inlier_ids == naive_vote(surface_set, cell, tol).inlier_ids


def test_generalized_separated_lines():
    surfaces = [line_through(0.0, b, i) for i, b in enumerate([0.05, 0.35, 0.65, 0.95])]
    result = generalized_vote(surfaces, Box.unit(2), Tolerance.uniform(0.05, 2))
    assert result.count == 1


def test_generalized_planted_line():
    instance = ivote.gen_line_instance(500, 0.2, 0.0, seed=8)
    surfaces = ivote.surfaces_from_instance(instance)
    eps = 0.02
    result = generalized_vote(surfaces, Box.unit(2), Tolerance.uniform(eps, 2))
    assert result.count >= len(instance.ground_truth.inlier_ids)
    assert np.all(np.abs(result.point - instance.ground_truth.point) <= 2 * eps)


def test_generalized_planted_line_without_outliers():
    instance = ivote.gen_line_instance(200, 1.0, 0.0, seed=8)
    eps = 0.02
    result = generalized_vote(ivote.surfaces_from_instance(instance), Box.unit(2), Tolerance.uniform(eps, 2))
    assert result.count == 200
    a, b = result.point
    assert np.all(np.abs(instance.items[:, 1] - a * instance.items[:, 0] - b) <= eps)


@pytest.mark.parametrize("model_tag, d", [("line2", 2), ("ray3", 3), ("sim2", 4)])
def test_thread_count_does_not_change_result(model_tag, d):
    surface_set = random_surface_set(model_tag, 150, np.random.default_rng(2), d=d)
    tol = Tolerance.uniform(0.1, d)
    single = generalized_vote(surface_set, Box.unit(d), tol, VotingConfig(threads=1))
    many = generalized_vote(surface_set, Box.unit(d), tol, VotingConfig(threads=8))
    assert single.same_outcome(many)
    assert single.ops_counter == many.ops_counter


def test_pruning_keeps_result():
    surface_set = random_surface_set("line2", 200, np.random.default_rng(6))
    tol = Tolerance.uniform(0.05, 2)
    pruned = generalized_vote(surface_set, Box.unit(2), tol, VotingConfig(prune=True))
    exhaustive = generalized_vote(surface_set, Box.unit(2), tol, VotingConfig(prune=False))
    assert pruned.same_outcome(exhaustive)
    assert pruned.ops_counter.box_intersection_calls <= exhaustive.ops_counter.box_intersection_calls


def test_truncation_is_flagged():
    surfaces = [line_through(0.3, 0.4, i) for i in range(3)]
    with pytest.warns(UserWarning, match="maximum depth"):
        result = generalized_vote(surfaces, Box.unit(2), Tolerance.uniform(0.01, 2), VotingConfig(max_depth=2))
    assert result.truncated
    assert result.count == 3


def test_leaves_match_naive_cells():
    surface_set = random_surface_set("line2", 80, np.random.default_rng(12))
    box = Box.unit(2)
    tol = Tolerance([0.1, 0.03])
    result = generalized_vote(surface_set, box, tol)
    spacing = cell_sizes(box, tol)
    index = (result.point - box.min_corner) / spacing - 0.5
    np.testing.assert_allclose(index, np.round(index), atol=1e-9)


def test_operation_counters():
    surface_set = random_surface_set("line2", 100, np.random.default_rng(13))
    tol = Tolerance.uniform(0.05, 2)
    naive = naive_vote(surface_set, Box.unit(2), tol)
    general = generalized_vote(surface_set, Box.unit(2), tol)
    assert naive.ops_counter.surface_evaluations == 100 * 32
    assert naive.ops_counter.cells_touched > 0
    assert naive.ops_counter.box_intersection_calls == 0
    assert general.ops_counter.box_intersection_calls >= 100


def test_naive_cells_touched_linear_in_n():
    tol = Tolerance.uniform(0.01, 2)
    touched = []
    for n in (1000, 10000):
        surfaces = ivote.surfaces_from_instance(ivote.gen_line_instance(n, 0.0, 0.0, seed=n))
        touched.append(naive_vote(surfaces, Box.unit(2), tol).ops_counter.cells_touched)
    assert 8 < touched[1] / touched[0] < 12


def _two_line_points(rng):
    x = rng.uniform(0.0, 1.0, 40)
    first = np.column_stack([x[:20], 0.3 * x[:20] + 0.2])
    second = np.column_stack([x[20:], 0.7 * x[20:] + 0.1])
    return np.vstack([first, second, rng.uniform(0.0, 1.0, (40, 2))])


def test_report_cells_finds_both_lines():
    surface_set = line_set(_two_line_points(np.random.default_rng(17)))
    tol = Tolerance.uniform(0.05, 2)
    cells = report_cells(surface_set, Box.unit(2), tol, 15)
    assert cells
    assert all(len(inliers) >= 15 for _, inliers in cells)
    counts = [len(inliers) for _, inliers in cells]
    assert counts == sorted(counts, reverse=True)
    assert any(set(range(20)) <= inliers for _, inliers in cells)
    assert any(set(range(20, 40)) <= inliers for _, inliers in cells)
    assert counts[0] == generalized_vote(surface_set, Box.unit(2), tol).count
    for cell, _ in cells:
        np.testing.assert_allclose(cell.sides, cell_sizes(Box.unit(2), tol))


def test_report_cells_above_every_count_is_empty():
    surface_set = line_set(_two_line_points(np.random.default_rng(17)))
    assert report_cells(surface_set, Box.unit(2), Tolerance.uniform(0.05, 2), 81) == []


def test_report_cells_rejects_nonpositive_threshold():
    with pytest.raises(ValueError, match="min_count"):
        report_cells([line_through(0.3, 0.4)], Box.unit(2), Tolerance.uniform(0.1, 2), 0)
