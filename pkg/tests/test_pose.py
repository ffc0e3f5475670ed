import numpy as np
import pytest

import ivote
from ivote import (
    Correspondence,
    DomainError,
    PoseHypothesis,
    pose5_surface_eval,
    pose6_surface_eval,
    pose7_surface_eval,
    radial5_surface_eval,
    reprojection_angular_error,
    rotation_angle_between,
)

IDENTITY = (0.0, 0.0, 0.0)


@pytest.mark.parametrize("w, x, y, xi, eta, f, expected", [
    ((1.0, 0.0, 0.0), 0.0, 0.0, 0.0, 0.0, 1.0, (0.0, 0.0)),
    ((2.0, 1.0, 3.0), 1.0, 1.0, 0.0, 1.0, 1.0, (0.0, 2.0)),
])
def test_pose5_surface_eval(w, x, y, xi, eta, f, expected):
    assert pose5_surface_eval(Correspondence(w, xi, eta), x, y, f) == pytest.approx(expected)


def test_pose5_height_without_elevation():
    c = Correspondence((3.0, -2.0, 1.7), 0.4, 0.0)
    for x, y, f in [(0.0, 0.0, 1.0), (1.0, 2.0, 0.8), (-4.0, 1.0, 1.2)]:
        assert pose5_surface_eval(c, x, y, f)[1] == pytest.approx(1.7)


def test_pose5_singular_heading():
    # the camera sits on the world point
    with pytest.raises(DomainError):
        pose5_surface_eval(Correspondence((1.0, 1.0, 0.0), 0.3, 0.1), 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        pose5_surface_eval(Correspondence((1.0, 1.0, 0.0), 0.3, 0.1), 0.0, 0.0, 0.0)


@pytest.mark.parametrize("w, xi, eta, z, f, expected", [
    ((0.0, 0.0, 1.0), 0.0, 0.0, 0.0, 1.0, (0.0, 0.0)),
    ((0.0, 0.0, 1.0), 0.5, 0.0, 1.0, 2.0, (0.5, 0.0)),
])
def test_pose7_surface_eval(w, xi, eta, z, f, expected):
    assert pose7_surface_eval(Correspondence(w, xi, eta), f, IDENTITY, z) == pytest.approx(expected)


def test_pose7_focal_minimum():
    with pytest.raises(DomainError):
        pose7_surface_eval(Correspondence((0.0, 0.0, 1.0), 0.1, 0.1), 0.0, IDENTITY, 1.0)


def test_pose6_is_unit_focal_pose7():
    c = Correspondence((0.4, -1.2, 3.0), 0.2, -0.1)
    phi = (0.1, -0.3, 0.2)
    assert pose6_surface_eval(c, phi, 0.7) == pytest.approx(pose7_surface_eval(c, 1.0, phi, 0.7))


def test_radial5_surface_eval():
    assert radial5_surface_eval(Correspondence((1.0, 2.0, 0.0), 1.0, 1.0), 0.0, IDENTITY) == pytest.approx(-1.0)


def test_radial5_without_eta_ignores_y():
    c = Correspondence((1.0, 2.0, 0.5), 0.7, 0.0)
    phi = (0.2, 0.1, -0.4)
    expected = -(ivote.angle_axis_to_matrix(phi) @ np.array(c.w))[1]
    for y in (-1.0, 0.0, 2.0):
        assert radial5_surface_eval(c, y, phi) == pytest.approx(expected)


def test_radial5_zero_xi():
    with pytest.raises(DomainError):
        radial5_surface_eval(Correspondence((1.0, 2.0, 0.0), 0.0, 1.0), 0.0, IDENTITY)


@pytest.fixture
def world_points():
    rng = np.random.default_rng(7)
    return np.column_stack([rng.uniform(-4.0, 4.0, (25, 2)), rng.uniform(6.0, 12.0, 25)])


@pytest.mark.parametrize("pose", [
    PoseHypothesis("pose6", (0.3, -0.2, 0.5), phi=(0.05, -0.1, 0.2)),
    PoseHypothesis("pose7", (-0.4, 0.1, 1.0), phi=(-0.1, 0.05, 0.15), focal=0.9),
])
def test_pose_surfaces_pass_through_truth(pose, world_points):
    x, y, z = pose.position
    for w, (xi, eta) in zip(world_points, pose.project(world_points)):
        c = Correspondence(w, xi, eta)
        if pose.model_tag == "pose6":
            value = pose6_surface_eval(c, pose.phi, z)
        else:
            value = pose7_surface_eval(c, pose.focal, pose.phi, z)
        assert value == pytest.approx((x, y), abs=1e-9)
        assert reprojection_angular_error(pose, c) == pytest.approx(0.0, abs=1e-9)


def test_pose5_surface_passes_through_truth(world_points):
    pose = PoseHypothesis("pose5", (1.0, -2.0, 1.5), kappa=0.3, focal=1.1)
    # in front of the camera, which looks along +x
    points = np.column_stack([world_points[:, 2] + 1.0, world_points[:, 0], 0.5 * world_points[:, 1]])
    for w, (xi, eta) in zip(points, pose.project(points)):
        c = Correspondence(w, xi, eta)
        kappa, z = pose5_surface_eval(c, 1.0, -2.0, 1.1)
        assert (kappa, z) == pytest.approx((0.3, 1.5), abs=1e-9)
        assert reprojection_angular_error(pose, c) == pytest.approx(0.0, abs=1e-9)


def test_radial5_surface_passes_through_truth(world_points):
    pose = PoseHypothesis("radial5", (0.6, -0.3, np.nan), phi=(0.2, 0.0, -0.1))
    x, y, _ = pose.position
    for w, (xi, eta) in zip(world_points, pose.project(world_points)):
        if abs(xi) < 1e-3:
            continue
        c = Correspondence(w, xi, eta)
        assert radial5_surface_eval(c, y, pose.phi) == pytest.approx(x, abs=1e-9)
        assert reprojection_angular_error(pose, c) == pytest.approx(0.0, abs=1e-9)


def test_family_agrees_with_eval(world_points):
    pose = PoseHypothesis("pose7", (0.2, 0.4, -0.5), phi=(0.3, -0.2, 0.1), focal=1.1)
    items = np.array([Correspondence(w, *p).as_item() for w, p in zip(world_points, pose.project(world_points))])
    surfaces = ivote.SurfaceSet.from_arrays(ivote.get_family("pose7"), *ivote.get_family("pose7").parameters_from_items(items)[:2])
    values = surfaces.family.dependent(pose.to_point()[None, :5], surfaces.essential)[:, 0, :] + surfaces.free
    np.testing.assert_allclose(values, np.tile([0.2, 0.4], (len(items), 1)), atol=1e-9)


def test_point_round_trip():
    for pose in [
        PoseHypothesis("pose5", (1.0, 2.0, 0.3), kappa=-0.2, focal=0.9),
        PoseHypothesis("pose6", (0.1, 0.2, 0.3), phi=(0.4, 0.5, 0.6)),
        PoseHypothesis("pose7", (0.1, 0.2, 0.3), phi=(0.4, 0.5, 0.6), focal=1.2),
    ]:
        assert PoseHypothesis.from_point(pose.model_tag, pose.to_point()) == pose


def test_rotated_world_consistency():
    # rotating the world and the camera together leaves the image unchanged
    rng = np.random.default_rng(3)
    w = np.column_stack([rng.uniform(-1.0, 1.0, (10, 2)), rng.uniform(4.0, 6.0, 10)])
    phi = np.array([0.2, -0.1, 0.3])
    pose = PoseHypothesis("pose6", (0.0, 0.0, 0.0), phi=phi)
    straight = PoseHypothesis("pose6", (0.0, 0.0, 0.0), phi=IDENTITY)
    rotated_world = w @ ivote.angle_axis_to_matrix(phi).T
    np.testing.assert_allclose(pose.project(w), straight.project(rotated_world), atol=1e-12)


def test_angular_error_behind_camera():
    pose = PoseHypothesis("pose6", (0.0, 0.0, 0.0), phi=IDENTITY)
    assert reprojection_angular_error(pose, Correspondence((0.0, 0.0, -1.0), 0.0, 0.0)) == pytest.approx(np.pi)


def test_angular_error_of_offset_match():
    pose = PoseHypothesis("pose6", (0.0, 0.0, 0.0), phi=IDENTITY)
    error = reprojection_angular_error(pose, Correspondence((0.0, 0.0, 1.0), np.tan(0.1), 0.0))
    assert error == pytest.approx(0.1)


def test_angular_error_at_camera_center():
    pose = PoseHypothesis("pose6", (0.0, 0.0, 0.0), phi=IDENTITY)
    with pytest.raises(DomainError):
        reprojection_angular_error(pose, Correspondence((0.0, 0.0, 0.0), 0.1, 0.1))


def test_noisy_inliers_concentrate_below_three_sigma():
    sigma_deg = 0.5
    instance = ivote.gen_pose_instance("pose6", 60, 1, 1.0, sigma_deg, seed=2)
    truth = PoseHypothesis.from_point("pose6", instance.ground_truth.point)
    errors = np.array([reprojection_angular_error(truth, Correspondence.from_item(item)) for item in instance.items])
    assert np.mean(errors < np.deg2rad(3 * sigma_deg)) > 0.95


def test_rotation_angle_between():
    first = ivote.angle_axis_to_matrix([0.0, 0.0, 0.3])
    second = ivote.angle_axis_to_matrix([0.0, 0.0, -0.2])
    assert rotation_angle_between(first, second) == pytest.approx(0.5)


def test_hypothesis_validation():
    with pytest.raises(ValueError):
        PoseHypothesis("pose5", (0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        PoseHypothesis("pose6", (0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        PoseHypothesis("pose7", (0.0, 0.0, 0.0), phi=IDENTITY, focal=0.0)
    with pytest.raises(ValueError):
        Correspondence((0.0, np.nan, 1.0), 0.1, 0.1)
