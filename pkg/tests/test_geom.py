import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import pinhole
from trajvqa.geom import (
    DirectionLabel,
    RigidTransform,
    all_direction_labels,
    angular_separation,
    backproject,
    compose,
    depth_from_disparity,
    direction_bucket,
    geodesic_angle,
    invert,
    look_at,
    project,
    quat_about_axis,
    transform_point,
)

finite = st.floats(-5, 5, allow_nan=False)
vec3 = st.tuples(finite, finite, finite)


@st.composite
def transforms(draw):
    axis = np.array(draw(vec3))
    if np.linalg.norm(axis) < 1e-3:
        axis = np.array([0.0, 0.0, 1.0])
    angle = draw(st.floats(-math.pi, math.pi))
    return RigidTransform(draw(vec3), quat_about_axis(axis, angle))


def test_transform_point_identity():
    assert np.allclose(transform_point(RigidTransform.identity(), (1, 2, 3)), (1, 2, 3))


def test_transform_point_translation():
    assert np.allclose(transform_point(RigidTransform((0, 0, 1)), (0, 0, 0)), (0, 0, 1))


def test_transform_point_yaw_90():
    x = RigidTransform((0, 0, 0), quat_about_axis((0, 0, 1), math.pi / 2))
    assert np.allclose(transform_point(x, (1, 0, 0)), (0, 1, 0), atol=1e-9)


def test_bad_quaternion_lengths():
    with pytest.raises(ValueError):
        RigidTransform((0, 0), (1, 0, 0, 0))


@settings(max_examples=200)
@given(transforms(), vec3)
def test_compose_with_inverse_is_identity(x, p):
    y = compose(x, invert(x))
    assert np.allclose(y.translation, 0, atol=1e-9)
    assert geodesic_angle(y.rotation, (1, 0, 0, 0)) < 1e-6
    assert np.allclose(transform_point(y, p), p, atol=1e-9)


@settings(max_examples=200)
@given(transforms(), transforms(), vec3)
def test_compose_matches_sequential_application(a, b, p):
    assert np.allclose(transform_point(compose(a, b), p), transform_point(a, transform_point(b, p)), atol=1e-9)


def test_project_examples():
    cam = pinhole(f=100.0, w=128, h=128)
    assert project(cam, (0, 0, 1)) == pytest.approx((64, 64))
    assert project(cam, (0.1, 0, 1)) == pytest.approx((74, 64))
    assert project(cam, (0, 0, -1)) is None


def test_backproject_examples():
    cam = pinhole(f=100.0, w=128, h=128)
    assert np.allclose(backproject(cam, (64, 64), 1.0), (0, 0, 1))
    with pytest.raises(ValueError):
        backproject(cam, (64, 64), 0.0)
    with pytest.raises(ValueError):
        backproject(cam, (200, 64), 1.0)


def test_backproject_roundtrip_random_rig():
    rng = np.random.default_rng(3)
    cam = pinhole(f=320.0, w=640, h=360, extrinsic=look_at((1.2, 0.3, 0.8), (0.4, 0, 0)))
    for _ in range(100):
        uv = (rng.uniform(0, 640), rng.uniform(0, 360))
        d = rng.uniform(0.1, 5.0)
        back = project(cam, backproject(cam, uv, d))
        assert math.dist(back, uv) <= 1e-6


def test_look_at_centres_target():
    cam = pinhole(f=200.0, w=320, h=240, extrinsic=look_at((1.0, 0.5, 0.6), (0.3, -0.1, 0.0)))
    assert project(cam, (0.3, -0.1, 0.0)) == pytest.approx((160, 120), abs=1e-9)
    # world z-up should map to image up (smaller v)
    u, v = project(cam, (0.3, -0.1, 0.1))
    assert v < 120


def test_depth_from_disparity():
    assert depth_from_disparity(10, 100, 0.1) == pytest.approx(1.0)
    assert depth_from_disparity(20, 100, 0.1) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        depth_from_disparity(0, 100, 0.1)


@pytest.mark.parametrize(
    "v,text",
    [((0.2, 0, 0), "Right"), ((0, -0.1, 0), "Upper"), ((0.1, -0.1, 0), "Upper Right"),
     ((0, 0, -0.5), "Backward"), ((-0.1, 0.1, 0.1), "Lower Left Forward")],
)
def test_direction_bucket_examples(v, text):
    assert direction_bucket(v).text == text


def test_direction_bucket_degenerate():
    assert direction_bucket((0.001, 0, 0)) is None


@settings(max_examples=300)
@given(vec3)
def test_direction_bucket_antisymmetric(v):
    v = np.array(v)
    n = np.linalg.norm(v)
    if n < 0.01 or any(abs(abs(c) - 0.33 * n) < 1e-9 for c in v):
        return
    assert direction_bucket(-v) == direction_bucket(v).opposite()


def test_direction_label_space():
    labels = all_direction_labels()
    assert len(labels) == 26
    assert len({lab.text for lab in labels}) == 26
    for lab in labels:
        assert DirectionLabel.parse(lab.text) == lab
    with pytest.raises(ValueError):
        DirectionLabel()


def test_shares_component():
    assert DirectionLabel("Upper", "Left").shares_component(DirectionLabel("Upper"))
    assert not DirectionLabel("Upper", "Left").shares_component(DirectionLabel("Lower", "Right"))


def test_angular_separation():
    assert angular_separation((1, 0), (0, 1)) == pytest.approx(90)
    assert angular_separation((1, 0), (-1, 0)) == pytest.approx(180)
    assert angular_separation((1, 0), (1, 1)) == pytest.approx(45, abs=1e-9)
    with pytest.raises(ValueError):
        angular_separation((0, 0), (1, 0))
