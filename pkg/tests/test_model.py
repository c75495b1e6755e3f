from __future__ import annotations

import math
import time

import numpy as np
import pytest

from gen import random_model, random_state
from perchsim.compliance import build_actuators
from perchsim.model import (
    JointDef,
    LinkDef,
    ModelDef,
    ModelSemanticError,
    ModelSyntaxError,
    State,
    forward_kinematics,
    parse_model,
    point_jacobian,
    serialize_model,
)
from perchsim.robots import build_astrobee_claw, build_astrobee_dexcohand
from perchsim.spatial import Pose, Quaternion

MINIMAL = "link base parent=world joint=free mass=2 inertia=1,1,1,0,0,0\n"


def test_parse_minimal():
    m = parse_model(MINIMAL)
    assert len(m.links) == 1 and m.nq == 7 and m.nv == 6


def test_duplicate_name_rejected():
    text = MINIMAL + "link base parent=base joint=revolute mass=1 inertia=1,1,1,0,0,0\n"
    with pytest.raises(ModelSemanticError) as exc:
        parse_model(text)
    assert exc.value.line == 2 and "duplicate" in str(exc.value)


@pytest.mark.parametrize(
    "text, cls, line",
    [
        ("link base parent=world joint=free mass=-1 inertia=1,1,1,0,0,0\n", ModelSemanticError, 1),
        (MINIMAL + "link a parent=base joint=free mass=1 inertia=1,1,1,0,0,0\n", ModelSemanticError, 2),
        (MINIMAL + "link a parent=nowhere joint=revolute mass=1 inertia=1,1,1,0,0,0\n", ModelSemanticError, 2),
        (MINIMAL + "link a parent=base joint=hinge mass=1\n", ModelSyntaxError, 2),
        (MINIMAL + "bogus x\n", ModelSyntaxError, 2),
        (MINIMAL + "link a parent=base joint=revolute mass=1 axis=1,0\n", ModelSyntaxError, 2),
        (MINIMAL + "link a parent=base joint=revolute mass=nan\n", ModelSyntaxError, 2),
        (MINIMAL + "geom a shape=sphere size=0.1 material=x\n", ModelSemanticError, 2),
    ],
)
def test_parse_errors_are_positioned(text, cls, line):
    with pytest.raises(cls) as exc:
        parse_model(text)
    assert exc.value.line == line and exc.value.column >= 1


def test_cycle_rejected():
    text = MINIMAL + "link a parent=b joint=revolute mass=1 inertia=1,1,1,0,0,0\nlink b parent=a joint=revolute mass=1 inertia=1,1,1,0,0,0\n"
    with pytest.raises(ModelSemanticError):
        parse_model(text)


def test_round_trip_generated_models():
    rng = np.random.default_rng(10)
    for _ in range(100):
        m = random_model(rng)
        text = serialize_model(m)
        again = parse_model(text, name=m.name)
        assert again == m
        assert serialize_model(again) == text


def test_builtins_round_trip():
    for m in (build_astrobee_claw(), build_astrobee_dexcohand()):
        assert parse_model(serialize_model(m), name=m.name) == m


def test_fk_zero_configuration_chains_offsets():
    rng = np.random.default_rng(11)
    m = random_model(rng, 6)
    st = m.default_state()
    st.q[:] = 0.0
    st.q[3] = 1.0
    for d in m.topology.joint_dofs:
        st.q[m.topology.dof_q[d]] = 0.0
    poses = forward_kinematics(m, st)
    for i, link in enumerate(m.links[1:], start=1):
        parent = m.topology.parent[i]
        assert poses[i].allclose(poses[parent] @ link.joint_pose, atol=1e-12)


def _planar_arm() -> ModelDef:
    z = (0.0, 0.0, 1.0)
    links = (
        LinkDef("base", "world", JointDef("base", "free"), 1.0),
        LinkDef("a", "base", JointDef("a", "revolute", z), 1.0),
        LinkDef("b", "a", JointDef("b", "revolute", z), 1.0, joint_pose=Pose(translation=(1.0, 0.0, 0.0))),
        LinkDef("tip", "b", JointDef("tip", "fixed"), 1.0, joint_pose=Pose(translation=(1.0, 0.0, 0.0))),
    )
    return ModelDef(links)


def test_fk_planar_two_link():
    m = _planar_arm()
    st = m.default_state()
    st.q[7] = math.pi / 2
    tip = forward_kinematics(m, st)[3]
    assert np.allclose(tip.t, (0.0, 2.0, 0.0), atol=1e-12)


def test_fk_base_translation_equivariance():
    rng = np.random.default_rng(12)
    m = random_model(rng, 6)
    st = random_state(rng, m)
    d = np.array([0.3, -1.2, 2.5])
    moved = State(st.q.copy(), st.v.copy())
    moved.q[0:3] += d
    for a, b in zip(forward_kinematics(m, st), forward_kinematics(m, moved)):
        assert np.allclose(b.t - a.t, d, atol=1e-12)
        assert np.array_equal(a.rotation.as_array(), b.rotation.as_array())


def test_fk_tree_property_bit_identical():
    rng = np.random.default_rng(13)
    for _ in range(20):
        m = random_model(rng, 6, kinds=("revolute", "prismatic"))
        st = random_state(rng, m)
        topo = m.topology
        base = forward_kinematics(m, st)
        for d in topo.joint_dofs:
            moved = State(st.q.copy(), st.v.copy())
            moved.q[topo.dof_q[d]] += 0.3
            after = forward_kinematics(m, moved)
            j = topo.dof_link[d]
            for k in range(topo.n):
                if not topo.is_ancestor(j, k):
                    assert after[k] == base[k]


def test_jacobian_revolute_column():
    links = (
        LinkDef("base", "world", JointDef("base", "free"), 1.0),
        LinkDef("a", "base", JointDef("a", "revolute", (0.0, 0.0, 1.0)), 1.0),
    )
    m = ModelDef(links)
    st = m.default_state()
    r = 0.7
    J = point_jacobian(m, st, "a", (r, 0.0, 0.0))
    assert np.allclose(J[:, 6], (0.0, r, 0.0), atol=1e-15)
    J_axis = point_jacobian(m, st, "a", (0.0, 0.0, 0.4))
    assert np.allclose(J_axis[:, 6], 0.0, atol=1e-15)


def test_jacobian_unknown_link():
    m = _planar_arm()
    with pytest.raises(KeyError):
        point_jacobian(m, m.default_state(), "nope", (0, 0, 0))


def _material_point_position(m, st, link, local):
    return forward_kinematics(m, st)[link].transform_point(local)


def _advance(m, q, v, h):
    from perchsim.model import integrate_positions

    return integrate_positions(m, q, v, h)


def test_jacobian_matches_finite_differences_200_samples():
    rng = np.random.default_rng(14)
    h = 1e-6
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(200):
        m = random_model(rng, int(rng.integers(2, 7)), kinds=("revolute", "prismatic", "fixed"))
        st = random_state(rng, m)
        link = int(rng.integers(0, m.topology.n))
        pose = forward_kinematics(m, st)[link]
        local = rng.normal(size=3) * 0.2
        x = pose.transform_point(local)
        J = point_jacobian(m, st, link, x)
        plus = State(_advance(m, st.q, st.v, h), st.v)
        minus = State(_advance(m, st.q, st.v, -h), st.v)
        fd = (_material_point_position(m, plus, link, local) - _material_point_position(m, minus, link, local)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(J @ st.v - fd))))
        # columns off the root path are zero
        for d in range(m.nv):
            if not m.topology.path_mask[link, d]:
                assert not J[:, d].any()
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-6
    assert elapsed < 5.0


def test_builtin_structure():
    claw, dex = build_astrobee_claw(), build_astrobee_dexcohand()
    arm = ("arm_pan", "arm_tilt")
    grip_dex = [j for j in dex.topology.joint_names if j not in arm]
    assert len(grip_dex) == 6
    act = build_actuators(claw)
    grip_cmds = [n for n in act.names if n not in arm]
    assert grip_cmds == ["claw"]
    couples = [l.joint.coupling for l in claw.links if l.joint.coupling]
    assert len(couples) == 2 and all(c == ("claw", 1.0) for c in couples)
    for name in arm:
        assert claw.links[claw.link_index(name)] == dex.links[dex.link_index(name)]
    # universal joint: abduction and proximal flexion axes intersect and are orthogonal
    for side in ("a", "b"):
        abd = dex.links[dex.link_index(f"{side}_abd")]
        prox = dex.links[dex.link_index(f"{side}_prox")]
        assert prox.joint_pose == Pose()
        assert abs(np.dot(abd.joint.axis, prox.joint.axis)) < 1e-12


def _perch_configuration(model: ModelDef) -> State:
    """Default state with every gripper joint at its closed target."""
    st = model.default_state()
    topo = model.topology
    for i, link in enumerate(model.links):
        if link.joint.grip is not None:
            st.q[topo.q_adr[i]] = link.joint.grip[1]
    return st


def _tip(model, st, link_name):
    i = model.link_index(link_name)
    link = model.links[i]
    g = link.geoms[-1]
    local = np.array(g.pose.translation)
    if g.shape == "capsule":
        local = local + g.pose.R @ np.array((0.0, 0.0, g.size[1]))
    return i, forward_kinematics(model, st)[i].transform_point(local)


def _gripper_columns(model):
    act = build_actuators(model)
    return [int(d) for d, n in zip(act.dofs, act.joint_names) if not n.startswith("arm_")]


def test_column_space_rank_dexcohand_vs_claw():
    dex = build_astrobee_dexcohand()
    st = _perch_configuration(dex)
    for side in ("a", "b"):
        i, x = _tip(dex, st, f"{side}_dist")
        J = point_jacobian(dex, st, i, x)[:, _gripper_columns(dex)]
        sv = np.linalg.svd(J, compute_uv=False)
        assert int(np.sum(sv > 1e-9)) == 3
    claw = build_astrobee_claw()
    st = _perch_configuration(claw)
    cols = _gripper_columns(claw)
    act = build_actuators(claw)
    # one actuator drives both fingers: collapse the coupled columns into one
    ratio = np.array([act.ratio[list(act.dofs).index(c)] for c in cols])
    for side in ("r", "l"):
        i, x = _tip(claw, st, f"claw_{side}")
        J = point_jacobian(claw, st, i, x)[:, cols]
        sv = np.linalg.svd(J, compute_uv=False)
        assert int(np.sum(sv > 1e-9)) <= 1
        assert int(np.sum(np.linalg.svd((J @ ratio)[:, None], compute_uv=False) > 1e-9)) <= 1


def test_quat_in_state_is_unit_after_fk():
    rng = np.random.default_rng(15)
    m = random_model(rng, 3)
    st = random_state(rng, m)
    for p in forward_kinematics(m, st):
        assert abs(p.rotation.norm() - 1.0) <= 1e-9
    assert isinstance(forward_kinematics(m, st)[0].rotation, Quaternion)
