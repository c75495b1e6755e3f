"""Random model, state and scenario generators shared by the test modules."""

from __future__ import annotations

import numpy as np

from perchsim.model import GeomDef, JointDef, LinkDef, Material, ModelDef, State
from perchsim.scenario import Gripper, JointTarget, PhaseDef, Ramp, ScenarioDef, Step, Thrust, Trapezoid
from perchsim.spatial import Pose, Quaternion


def _unit(rng) -> tuple:
    a = rng.normal(size=3)
    return tuple(a / np.linalg.norm(a))


def _pose(rng, scale=0.2) -> Pose:
    return Pose(Quaternion(*rng.normal(size=4)), tuple(rng.normal(size=3) * scale))


def _inertia(rng) -> tuple:
    A = rng.normal(size=(3, 3)) * 0.1
    I = A @ A.T + 0.01 * np.eye(3)
    return (I[0, 0], I[1, 1], I[2, 2], I[0, 1], I[0, 2], I[1, 2])


def random_model(rng, n_links: int | None = None, kinds=("revolute", "prismatic", "fixed")) -> ModelDef:
    """Free-floating base plus a random tree of 1-joint links."""
    n_links = int(rng.integers(1, 7)) if n_links is None else n_links
    mats = (Material("m0", 1e5, 0.0, 0.5), Material("m1", 2e5, 1.0, 0.9))
    links = [
        LinkDef(
            "base", "world", JointDef("base", "free"), float(rng.uniform(1, 10)),
            tuple(rng.normal(size=3) * 0.05), _inertia(rng), _pose(rng),
            (GeomDef("box", (0.1, 0.1, 0.1), Pose(), "m0"),),
        )
    ]
    for i in range(1, n_links):
        kind = str(rng.choice(kinds))
        parent = links[int(rng.integers(0, i))].name
        limits = (-1.0, 1.5) if rng.random() < 0.5 and kind != "fixed" else None
        geoms = ()
        if rng.random() < 0.5:
            geoms = (GeomDef("capsule", (0.01, 0.05), _pose(rng, 0.05), "m1"),)
        links.append(
            LinkDef(
                f"l{i}", parent,
                JointDef(f"l{i}", kind, axis=_unit(rng), limits=limits, damping=float(rng.uniform(0, 0.1)),
                         actuated=kind != "fixed" and rng.random() < 0.5),
                float(rng.uniform(0.05, 1.0)), tuple(rng.normal(size=3) * 0.05), _inertia(rng), _pose(rng), geoms,
            )
        )
    statics = (GeomDef("cylinder", (0.011, 0.3), _pose(rng, 1.0), "m0"),)
    return ModelDef(tuple(links), mats, statics, "rand")


def random_state(rng, model: ModelDef, speed: float = 1.0) -> State:
    q = model.default_state().q
    topo = model.topology
    q[0:3] = rng.normal(size=3) * 0.5
    q[3:7] = Quaternion(*rng.normal(size=4)).as_array()
    for d in topo.joint_dofs:
        q[topo.dof_q[d]] = rng.uniform(-1.0, 1.0)
    return State(q, rng.normal(size=model.nv) * speed, 0.0)


_NAMES = ("approach", "perch", "tilt", "pan", "hold", "p_1", "x-y", "Z9")


def _f(rng) -> float:
    return float(rng.choice([rng.uniform(-5, 5), rng.uniform(0.001, 3.0), round(float(rng.uniform(-2, 2)), 2)]))


def random_scenario(rng) -> ScenarioDef:
    n = int(rng.integers(1, 5))
    names = list(rng.permutation(_NAMES)[:n])
    phases = []
    for name in names:
        cmds = []
        if rng.random() < 0.5:
            cmds.append(Thrust(tuple(_f(rng) for _ in range(6)), str(rng.choice(["hold", "ramp"]))))
        for j in rng.permutation(["arm_pan", "arm_tilt", "claw"])[: int(rng.integers(0, 3))]:
            prof = [Step(_f(rng)), Ramp(_f(rng), _f(rng)), Trapezoid(_f(rng), float(rng.uniform(0.01, 0.5)))][int(rng.integers(0, 3))]
            cmds.append(JointTarget(str(j), prof))
        if rng.random() < 0.4:
            cmds.append(Gripper(str(rng.choice(["open", "close"])), float(rng.uniform(0.01, 2.0))))
        phases.append(PhaseDef(str(name), float(rng.uniform(0.01, 10.0)), tuple(cmds)))
    log = tuple(rng.permutation(["base_position", "base_quat", "joints", "contacts", "momentum"])[: int(rng.integers(0, 6))])
    return ScenarioDef(
        name=f"s{int(rng.integers(0, 1000))} \"q\"",
        model=str(rng.choice(["builtin:claw", "builtin:dexcohand", "models/x.model"])),
        timestep=float(rng.choice([1e-3, 5e-4, float(rng.uniform(1e-4, 1e-2))])),
        gravity=tuple(_f(rng) for _ in range(3)),
        seed=int(rng.integers(0, 10**6)),
        phases=tuple(phases),
        log=tuple(str(c) for c in log),
    )
