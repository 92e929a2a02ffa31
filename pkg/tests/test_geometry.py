import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swarmfollow.geometry import (CameraIntrinsics, Pose, compose, inverse, pixel_rays,
                                  project_point, transform_point, wrap_angle)

coord = st.floats(-50, 50, allow_nan=False)
vec3 = st.tuples(coord, coord, coord)
angle = st.floats(-20, 20, allow_nan=False)
poses = st.builds(Pose, vec3, angle)

K = CameraIntrinsics()


def test_transform_identity():
    assert transform_point(Pose(), (1, 2, 3)) == (1, 2, 3)


def test_transform_quarter_turn():
    p = transform_point(Pose((0, 0, 0), math.pi / 2), (1, 0, 0))
    assert p == pytest.approx((0, 1, 0), abs=1e-15)


def test_transform_translation():
    assert transform_point(Pose((1, 1, 1), 0.0), (1, 0, 0)) == (2, 1, 1)


def test_project_on_axis():
    assert project_point(Pose(), K, (1, 0, 0)) == (480, 360)


def test_project_right_offset():
    # body -y is camera right
    u, v = project_point(Pose(), K, (1, -0.1, 0))
    assert u == pytest.approx(572.0, abs=1e-12)
    assert v == 360


def test_project_above_is_up_in_image():
    _, v = project_point(Pose(), K, (1, 0, 0.1))
    assert v == pytest.approx(360 - 92)


@pytest.mark.parametrize("p", [(0, 0, 0), (-1, 0, 0), (-3, 2, 1)])
def test_project_behind_camera(p):
    assert project_point(Pose(), K, p) is None


def test_pose_rejects_nonfinite():
    with pytest.raises(ValueError):
        Pose((math.nan, 0, 0))
    with pytest.raises(ValueError):
        Pose((0, 0, 0), math.inf)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(fx=0)
    with pytest.raises(ValueError):
        CameraIntrinsics(cx=960)
    assert K.scaled(0.25) == CameraIntrinsics(230, 230, 120, 90, 240, 180)


def test_wrap_angle_endpoints():
    assert wrap_angle(math.pi) == -math.pi
    assert wrap_angle(-math.pi) == -math.pi
    assert wrap_angle(-1e-18) < math.pi


@given(angle)
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi <= w < math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


@given(poses, vec3)
def test_inverse_roundtrip(pose, p):
    q = transform_point(pose, transform_point(inverse(pose), p))
    assert q == pytest.approx(p, abs=1e-9)


@given(poses, poses)
def test_compose_yaw_normalized(a, b):
    assert -math.pi <= compose(a, b).yaw < math.pi


@given(poses, vec3)
def test_compose_matches_sequential_transform(a, p):
    b = Pose((0.3, -1.0, 2.0), 0.7)
    q1 = transform_point(compose(a, b), p)
    q2 = transform_point(a, transform_point(b, p))
    assert q1 == pytest.approx(q2, abs=1e-9)


@given(st.floats(0.1, 10), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.01, 100))
def test_projection_scale_invariant(depth, y, z, lam):
    p1 = project_point(Pose(), K, (depth, y, z))
    p2 = project_point(Pose(), K, (lam * depth, lam * y, lam * z))
    assert p1 == pytest.approx(p2, abs=1e-9)


def test_pixel_rays_project_back_to_pixels():
    k = CameraIntrinsics(50, 50, 16, 12, 32, 24)
    rays = pixel_rays(k)
    assert rays.shape == (24, 32, 3)
    assert np.allclose(np.linalg.norm(rays, axis=-1), 1.0)
    for v, u in [(0, 0), (5, 17), (23, 31)]:
        assert project_point(Pose(), k, rays[v, u]) == pytest.approx((u, v), abs=1e-9)
