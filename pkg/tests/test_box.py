import numpy as np
import pytest

from ivote import Box, Interval, Tolerance, round_to_step, subdivide
from ivote._box import cell_sizes, default_max_depth, grid_levels


def test_subdivide_unit_square():
    children = subdivide(Box.unit(2))
    expected = [
        ([0.0, 0.0], [0.5, 0.5]),
        ([0.5, 0.0], [1.0, 0.5]),
        ([0.0, 0.5], [0.5, 1.0]),
        ([0.5, 0.5], [1.0, 1.0]),
    ]
    assert [(list(c.min_corner), list(c.max_corner)) for c in children] == expected


def test_subdivide_cube():
    children = subdivide(Box.unit(3))
    assert len(children) == 8
    for child in children:
        np.testing.assert_allclose(child.sides, 0.5)


def test_subdivide_sides():
    children = subdivide(Box([0.25, 0.0], [0.5, 0.5]))
    assert len(children) == 4
    for child in children:
        np.testing.assert_allclose(child.sides, [0.125, 0.25])


def test_subdivide_partition():
    box = Box([0.1, 0.2, 0.3], [0.6, 0.4, 0.9])
    children = subdivide(box)
    volume = sum(np.prod(c.sides) for c in children)
    assert volume == pytest.approx(np.prod(box.sides))
    rng = np.random.default_rng(0)
    for point in box.min_corner + rng.uniform(size=(200, 3)) * box.sides:
        assert sum(c.contains(point, atol=0.0) for c in children) >= 1


def test_subdivide_selected_axes():
    children = subdivide(Box.unit(3), axes=[2])
    assert len(children) == 2
    np.testing.assert_allclose(children[0].sides, [1.0, 1.0, 0.5])
    assert children[1].min_corner[2] == 0.5


def test_invalid_box():
    with pytest.raises(ValueError):
        Box([0.5, 0.0], [0.4, 1.0])
    with pytest.raises(ValueError):
        Box([0.0, 0.0], [1.5, 1.0])


def test_box_diameter_is_max_side():
    box = Box([0.0, 0.0], [0.25, 0.5])
    assert box.diameter == 0.5
    np.testing.assert_allclose(box.center, [0.125, 0.25])


@pytest.mark.parametrize("value, step, expected", [
    (0.37, 0.1, 0.4),
    (0.35, 0.1, 0.4),
    (-0.02, 0.05, 0.0),
    (-0.35, 0.1, -0.3),
    (1.0, 0.25, 1.0),
])
def test_round_to_step(value, step, expected):
    assert round_to_step(value, step) == pytest.approx(expected, abs=1e-12)


def test_round_to_step_array():
    np.testing.assert_allclose(round_to_step(np.array([0.12, 0.26]), np.array([0.1, 0.25])), [0.1, 0.25])


def test_round_to_step_rejects_bad_step():
    with pytest.raises(ValueError):
        round_to_step(0.3, 0.0)
    with pytest.raises(ValueError):
        round_to_step(0.3, -0.1)


def test_tolerance():
    tol = Tolerance([0.1, 0.01])
    assert tol.d == 2
    assert tol.eps_min == 0.01
    eps_prime = tol.eps_prime
    assert np.all(eps_prime <= tol.eps)
    assert eps_prime[1] == pytest.approx(0.01 / np.log(100))
    assert Tolerance.uniform(0.1, 3) == Tolerance([0.1, 0.1, 0.1])
    for bad in ([0.0], [1.5], [np.nan]):
        with pytest.raises(ValueError):
            Tolerance(bad)


def test_grid_levels():
    tol = Tolerance([0.1, 0.25])
    np.testing.assert_array_equal(grid_levels(Box.unit(2), tol), [4, 2])
    np.testing.assert_allclose(cell_sizes(Box.unit(2), tol), [1 / 16, 0.25])
    assert default_max_depth(Tolerance.uniform(0.01, 2)) == 9


def test_interval_arithmetic():
    a = Interval(np.array([-1.0]), np.array([2.0]))
    b = Interval(np.array([3.0]), np.array([4.0]))
    product = a * b
    assert (product.lo[0], product.hi[0]) == (-4.0, 8.0)
    difference = a - b
    assert (difference.lo[0], difference.hi[0]) == (-5.0, -1.0)
    square = a.square()
    assert (square.lo[0], square.hi[0]) == (0.0, 4.0)


def test_interval_division_singular():
    quotient = Interval.point(np.array([1.0])).divide(Interval(np.array([-0.5]), np.array([0.5])))
    assert quotient.lo[0] == -np.inf and quotient.hi[0] == np.inf
    quotient = Interval.point(np.array([1.0])).divide(Interval(np.array([2.0]), np.array([4.0])))
    assert (quotient.lo[0], quotient.hi[0]) == (0.25, 0.5)


def test_interval_nan_overlaps():
    nan = Interval(np.array([np.nan]), np.array([np.nan]))
    assert nan.overlaps(np.array([0.0]), np.array([1.0]))[0]
