from __future__ import annotations

import math

import numpy as np
import pytest

from gen import random_model, random_state
from perchsim.dynamics import (
    ThrusterCommand,
    bias_forces,
    forward_dynamics,
    kinetic_energy,
    mass_matrix,
    total_momentum,
    translational_step,
)
from perchsim.model import JointDef, LinkDef, ModelDef, State, forward_kinematics, integrate_positions, kinematics
from perchsim.robots import BASE_MASS, build_astrobee_dexcohand
from perchsim.spatial import Pose, Twist, Wrench


def free_body(mass=2.0, inertia=(0.1, 0.2, 0.3, 0.0, 0.0, 0.0), com=(0.0, 0.0, 0.0)) -> ModelDef:
    return ModelDef((LinkDef("base", "world", JointDef("base", "free"), mass, com, inertia),))


def arm_on_base() -> ModelDef:
    links = (
        LinkDef("base", "world", JointDef("base", "free"), 5.0, (0.01, 0.0, 0.0), (0.2, 0.3, 0.25, 0.01, 0.0, 0.0)),
        LinkDef(
            "upper", "base", JointDef("upper", "revolute", (0.0, 1.0, 0.0), damping=0.0), 0.5,
            (0.0, 0.0, 0.1), (0.002, 0.002, 0.0005, 0.0, 0.0, 0.0),
        ),
        LinkDef(
            "fore", "upper", JointDef("fore", "revolute", (1.0, 0.0, 0.0)), 0.3,
            (0.0, 0.0, 0.08), (0.001, 0.001, 0.0003, 0.0, 0.0, 0.0), Pose(translation=(0.0, 0.0, 0.2)),
        ),
    )
    return ModelDef(links)


def test_mass_matrix_single_body():
    m = free_body()
    M = mass_matrix(m, m.default_state())
    expect = np.zeros((6, 6))
    expect[:3, :3] = 2.0 * np.eye(3)
    expect[3:, 3:] = np.diag([0.1, 0.2, 0.3])
    assert np.allclose(M, expect, atol=1e-15)


def test_mass_matrix_spd_and_energy():
    rng = np.random.default_rng(30)
    for _ in range(100):
        m = random_model(rng)
        st = random_state(rng, m)
        M = mass_matrix(m, st)
        assert np.array_equal(M, M.T)
        np.linalg.cholesky(M)
        kin = kinematics(m, st.q)
        V = (m.topology.path_mask * st.v) @ kin.S.T
        per_link = sum(0.5 * V[i] @ kin.inertia[i] @ V[i] for i in range(m.topology.n))
        assert abs(0.5 * st.v @ M @ st.v - per_link) <= 1e-10 * max(1.0, per_link)
        # per-link energy again, from each link's own body-frame inertia
        poses = forward_kinematics(m, st)
        e = 0.0
        for i, link in enumerate(m.links):
            R, p = poses[i].R, poses[i].t
            w, v0 = V[i][:3], V[i][3:]
            body = Twist(R.T @ w, R.T @ (v0 + np.cross(w, p)))
            e += link.spatial_inertia.kinetic_energy(body)
        assert abs(e - per_link) <= 1e-10 * max(1.0, e)


def test_bias_zero_at_rest():
    rng = np.random.default_rng(31)
    m = random_model(rng, 5)
    st = random_state(rng, m, speed=0.0)
    assert np.array_equal(bias_forces(m, st), np.zeros(m.nv))


def test_bias_gyroscopic_torque():
    m = free_body()
    st = m.default_state()
    w = np.array([0.3, -1.1, 0.7])
    st.v[3:6] = w
    I = np.diag([0.1, 0.2, 0.3])
    b = bias_forces(m, st)
    assert np.allclose(b[3:6], np.cross(w, I @ w), atol=1e-14)
    assert np.allclose(b[0:3], 0.0, atol=1e-14)


def _advance(m, st, a, h):
    return State(integrate_positions(m, st.q, st.v, h), st.v + h * a)


def test_energy_rate_equals_applied_power():
    rng = np.random.default_rng(32)
    h = 1e-6
    for _ in range(30):
        m = random_model(rng, 5, kinds=("revolute", "prismatic"))
        st = random_state(rng, m)
        tau = rng.normal(size=m.nv)
        a = np.linalg.solve(mass_matrix(m, st), tau - bias_forces(m, st))
        dE = (kinetic_energy(m, _advance(m, st, a, h)) - kinetic_energy(m, _advance(m, st, a, -h))) / (2 * h)
        assert abs(dE - st.v @ tau) <= 1e-6 * max(1.0, abs(st.v @ tau))


def test_thrust_closed_form():
    m = build_astrobee_dexcohand()
    only_base = ModelDef((m.links[0],), m.materials, (), "base")
    st = only_base.default_state()
    thrust = ThrusterCommand(Wrench((0.0, 0.0, 0.0), (0.1, 0.0, 0.0)))
    dt = 1e-3
    for _ in range(5000):
        st = forward_dynamics(only_base, st, np.zeros(6), (), thrust, dt)
    assert abs(np.linalg.norm(st.v[0:3]) - 0.1 * 5.0 / BASE_MASS) <= 1e-9
    assert abs(np.linalg.norm(st.v[0:3]) - 0.052192) <= 1e-6


def test_translational_model():
    v = translational_step(9.58, (0.0, 0.0, 0.0), (0.1, 0.0, 0.0), [(0.02, 0.0, 0.0)], 1.0)
    assert np.allclose(v, (0.08 / 9.58, 0.0, 0.0))


def test_free_flight_constant_momentum():
    rng = np.random.default_rng(33)
    m = random_model(rng, 4, kinds=("revolute",))
    st = random_state(rng, m, speed=0.5)
    h0 = total_momentum(m, st)
    for _ in range(500):
        st = forward_dynamics(m, st, np.zeros(m.nv), dt=1e-3)
    h1 = total_momentum(m, st)
    assert np.max(np.abs(h1.linear - h0.linear)) <= 1e-12
    assert np.max(np.abs(h1.angular - h0.angular)) <= 1e-12


def test_free_body_linear_drift_exact():
    m = free_body()
    st = m.default_state()
    st.v[:] = (0.1, -0.2, 0.3, 0.0, 0.0, 0.0)
    for _ in range(1000):
        st = forward_dynamics(m, st, np.zeros(6), dt=1e-3)
    assert np.allclose(st.q[0:3], (0.1, -0.2, 0.3), atol=1e-12)
    assert np.allclose(total_momentum(m, st).linear, (0.2, -0.4, 0.6), atol=1e-12)


def test_momentum_conservation_sinusoidal_arm_10s():
    m = arm_on_base()
    st = m.default_state()
    dt = 1e-3
    k, d = 20.0, 1.0
    K = np.zeros(m.nv)
    D = np.zeros(m.nv)
    K[6:8], D[6:8] = k, d
    h0 = total_momentum(m, st)
    worst_l = worst_a = 0.0
    for n in range(10000):
        t = n * dt
        target = np.array([0.8 * math.sin(2 * math.pi * 0.5 * t), 0.5 * math.sin(2 * math.pi * 0.3 * t)])
        tau = np.zeros(m.nv)
        tau[6:8] = k * (target - st.q[7:9])
        st = forward_dynamics(m, st, tau, dt=dt, stiffness=K, damping=D)
        h = total_momentum(m, st)
        worst_l = max(worst_l, float(np.max(np.abs(h.linear - h0.linear))))
        worst_a = max(worst_a, float(np.max(np.abs(h.angular - h0.angular))))
    assert abs(st.q[7]) > 0.1  # the arm really moved
    assert worst_l <= 1e-9
    assert worst_a <= 1e-8


def test_momentum_examples():
    m = free_body()
    st = m.default_state()
    assert not total_momentum(m, st).linear.any() and not total_momentum(m, st).angular.any()
    st.v[0:3] = (1.0, 0.0, 0.0)
    assert np.allclose(total_momentum(m, st).linear, (2.0, 0.0, 0.0))


def test_momentum_equals_mass_times_com_rate():
    m = arm_on_base()
    st = m.default_state()
    st.v[:] = (0.01, 0.02, -0.01, 0.1, -0.05, 0.2, 0.5, -0.3)
    dt = 1e-3
    total_mass = sum(l.mass for l in m.links)

    def com(s):
        kin = kinematics(m, s.q)
        return (kin.com * m.topology.mass[:, None]).sum(axis=0) / total_mass

    states = [st]
    for _ in range(200):
        states.append(forward_dynamics(m, states[-1], np.zeros(m.nv), dt=dt))
    h = 1e-6
    for s in states[::10]:
        plus = State(integrate_positions(m, s.q, s.v, h), s.v)
        minus = State(integrate_positions(m, s.q, s.v, -h), s.v)
        rate = (com(plus) - com(minus)) / (2 * h)
        p = total_momentum(m, s).linear
        assert np.max(np.abs(total_mass * rate - p)) <= 1e-6


def test_impulse_bookkeeping_one_step():
    m = arm_on_base()
    rng = np.random.default_rng(34)
    st = random_state(rng, m, speed=0.2)
    dt = 1e-3
    F = np.array([0.3, -0.1, 0.2])
    thrust = ThrusterCommand(Wrench((0.0, 0.0, 0.0), F))
    impulses = [((0.0, 0.0, 0.3), "fore", (0.01, -0.02, 0.005)), ((0.1, 0.0, 0.0), "base", (0.0, 0.003, 0.0))]
    h0 = total_momentum(m, st).linear
    new = forward_dynamics(m, st, rng.normal(size=m.nv) * 0.1, impulses, thrust, dt)
    R = kinematics(m, st.q).R[0]
    expect = h0 + dt * (R @ F) + sum(np.array(p) for _, _, p in impulses)
    assert np.max(np.abs(total_momentum(m, new).linear - expect)) <= 1e-10


def test_energy_non_increasing_with_damping():
    m = arm_on_base()
    m = m.with_link("upper", joint=JointDef("upper", "revolute", (0.0, 1.0, 0.0), damping=0.05))
    st = m.default_state()
    st.v[6:8] = (2.0, -1.5)
    st.v[3:6] = (0.2, 0.1, -0.3)
    e = kinetic_energy(m, st)
    for _ in range(2000):
        st = forward_dynamics(m, st, np.zeros(m.nv), dt=1e-3, damping=np.array([0, 0, 0, 0, 0, 0, 0.05, 0.02]))
        e_new = kinetic_energy(m, st)
        assert e_new - e <= 1e-6
        e = e_new


def test_forward_dynamics_deterministic():
    rng = np.random.default_rng(35)
    m = random_model(rng, 5)
    st = random_state(rng, m)
    a = forward_dynamics(m, st, np.ones(m.nv) * 0.1, dt=1e-3)
    b = forward_dynamics(m, st, np.ones(m.nv) * 0.1, dt=1e-3)
    assert a.q.tobytes() == b.q.tobytes() and a.v.tobytes() == b.v.tobytes()


def test_forward_dynamics_rejects_bad_dt():
    m = free_body()
    with pytest.raises(ValueError):
        forward_dynamics(m, m.default_state(), np.zeros(6), dt=0.0)
