from __future__ import annotations

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from perchsim.spatial import (
    Pose,
    Quaternion,
    SpatialInertia,
    Twist,
    Wrench,
    compose,
    integrate_orientation,
    invert,
    transform_inertia,
)


def random_quat(rng) -> Quaternion:
    return Quaternion(*rng.normal(size=4))


def random_pose(rng) -> Pose:
    return Pose(random_quat(rng), tuple(rng.normal(size=3)))


def random_inertia(rng) -> SpatialInertia:
    A = rng.normal(size=(3, 3))
    return SpatialInertia(float(rng.uniform(0.1, 5.0)), rng.normal(size=3) * 0.3, A @ A.T + 0.1 * np.eye(3))


def test_compose_identity():
    p = Pose(Quaternion.from_axis_angle((1, 2, 3), 0.7), (1.0, -2.0, 0.5))
    assert compose(Pose.identity(), p).allclose(p)
    assert compose(p, Pose.identity()).allclose(p)


def test_compose_quarter_turn():
    rz = Pose(Quaternion.from_axis_angle((0, 0, 1), math.pi / 2))
    out = compose(rz, Pose(translation=(1.0, 0.0, 0.0)))
    assert np.allclose(out.t, (0.0, 1.0, 0.0), atol=1e-15)
    assert out.allclose(Pose(rz.rotation, (0.0, 1.0, 0.0)))


def test_group_laws_random():
    rng = np.random.default_rng(1)
    for _ in range(200):
        a, b, c = random_pose(rng), random_pose(rng), random_pose(rng)
        assert compose(compose(a, b), c).allclose(compose(a, compose(b, c)))
        assert compose(a, invert(a)).allclose(Pose.identity())
        assert compose(invert(a), a).allclose(Pose.identity())


def test_quaternion_canonical_and_unit():
    q = Quaternion(-1.0, 0.0, 0.0, 0.0)
    assert q.w == 1.0
    rng = np.random.default_rng(2)
    q = Quaternion.identity()
    for _ in range(1000):
        q = q * random_quat(rng)
        assert abs(q.norm() - 1.0) <= 1e-9
        assert q.w >= 0.0


def test_integrate_orientation_zero_rate():
    q = Quaternion.from_axis_angle((0, 1, 0), 0.3)
    assert integrate_orientation(q, (0.0, 0.0, 0.0), 0.1) is q


def test_integrate_orientation_exact():
    q = integrate_orientation(Quaternion.identity(), (0.0, 0.0, math.pi), 0.5)
    ref = Quaternion.from_axis_angle((0, 0, 1), math.pi / 2)
    assert np.allclose(q.as_array(), ref.as_array(), atol=1e-6)


def test_integrate_orientation_stays_unit():
    rng = np.random.default_rng(3)
    q = Quaternion.identity()
    for _ in range(1000):
        q = integrate_orientation(q, rng.normal(size=3) * 5.0, 1e-2)
    assert abs(q.norm() - 1.0) <= 1e-9


def test_power_invariance():
    rng = np.random.default_rng(4)
    for _ in range(200):
        X = random_pose(rng)
        w = Wrench(rng.normal(size=3), rng.normal(size=3))
        v = Twist(rng.normal(size=3), rng.normal(size=3))
        assert abs(w.transform(X).power(v.transform(X)) - w.power(v)) <= 1e-12 * max(1.0, abs(w.power(v)))


def test_twist_transform_matches_finite_differences():
    rng = np.random.default_rng(5)
    h = 1e-6
    for _ in range(20):
        X = random_pose(rng)
        v = Twist(rng.normal(size=3), rng.normal(size=3))
        x_body = rng.normal(size=3)
        # velocity of a body point, in frame B then mapped to A
        vel_a = X.R @ v.point_velocity(x_body)
        x_a = X.transform_point(x_body)
        assert np.allclose(v.transform(X).point_velocity(x_a), vel_a, atol=1e-12)
        # finite-differenced motion of the material point, seen from frame A
        def pos(s):
            motion = Pose(Quaternion.from_rotation_vector(v.angular * s), tuple(v.linear * s))
            return X.transform_point(motion.transform_point(x_body))

        fd = (pos(h) - pos(-h)) / (2 * h)
        assert np.allclose(fd, v.transform(X).point_velocity(x_a), atol=1e-6)


def test_transform_inertia_identity():
    rng = np.random.default_rng(6)
    I = random_inertia(rng)
    J = transform_inertia(I, Pose.identity())
    assert np.allclose(J.to_matrix(), I.to_matrix(), atol=1e-15)


def test_parallel_axis_point_mass():
    m = 2.0
    r = np.array([0.3, -0.2, 0.5])
    tiny = 1e-9 * np.eye(3)
    I = transform_inertia(SpatialInertia(m, (0, 0, 0), tiny), Pose(translation=tuple(r)))
    expect = tiny + m * (r @ r * np.eye(3) - np.outer(r, r))
    assert np.allclose(I.inertia_about_origin(), expect, atol=1e-12)


def test_kinetic_energy_invariance():
    rng = np.random.default_rng(7)
    for _ in range(100):
        I, X = random_inertia(rng), random_pose(rng)
        v = Twist(rng.normal(size=3), rng.normal(size=3))
        e0 = I.kinetic_energy(v)
        e1 = transform_inertia(I, X).kinetic_energy(v.transform(X))
        assert abs(e1 - e0) <= 1e-10 * max(1.0, abs(e0))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4).filter(lambda c: sum(x * x for x in c) > 1e-6))
def test_quaternion_construction_is_unit(c):
    q = Quaternion(*c)
    assert abs(q.norm() - 1.0) <= 1e-9 and q.w >= 0.0
