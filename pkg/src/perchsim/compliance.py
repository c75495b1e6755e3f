"""Joint and contact compliance, compliance ellipsoids, and the series-elastic
actuator model standing in for the soft hydraulic transmission.

Contact-frame compliance is the joint compliance pushed through the contact
Jacobian restricted to actuated columns: ``Cc = Ja Cq Ja^T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelDef, State

DEFAULT_STIFFNESS = 10.0  # N m/rad when a joint gives none


def _check_psd(m: np.ndarray, what: str):
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{what} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-12 * scale:
        raise ValueError(f"{what} must be symmetric")
    if m.size and np.linalg.eigvalsh(0.5 * (m + m.T))[0] < -1e-10 * scale:
        raise ValueError(f"{what} must be positive semidefinite")


@dataclass(frozen=True, eq=False)
class JointCompliance:
    """Compliance over actuated joints; ``dofs`` are their velocity indices."""

    matrix: np.ndarray
    dofs: tuple = ()

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("joint compliance must be square")
        if self.dofs and len(self.dofs) != m.shape[0]:
            raise ValueError("dofs do not match compliance size")
        _check_psd(m, "joint compliance")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dofs", tuple(int(d) for d in self.dofs))

    def scaled(self, factor: float) -> JointCompliance:
        return JointCompliance(self.matrix * factor, self.dofs)


@dataclass(frozen=True, eq=False)
class ContactCompliance:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("contact compliance must be 3x3")
        _check_psd(m, "contact compliance")
        object.__setattr__(self, "matrix", m)


def contact_compliance(J, Cq: JointCompliance, columns=None) -> ContactCompliance:
    """Contact-frame compliance ``Ja Cq Ja^T`` with ``Ja = J[:, columns]``.

    ``columns`` defaults to ``Cq.dofs``; with neither, J must already be 3 x n_a.
    """
    J = np.asarray(J, dtype=float)
    cols = Cq.dofs if columns is None else tuple(columns)
    Ja = J[:, list(cols)] if cols else J
    if Ja.shape != (3, Cq.matrix.shape[0]):
        raise ValueError(f"Jacobian block {Ja.shape} does not match compliance {Cq.matrix.shape}")
    C = Ja @ Cq.matrix @ Ja.T
    return ContactCompliance(0.5 * (C + C.T))


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigendecomposition of a small symmetric matrix.

    Returns (eigenvalues, eigenvectors as columns), unsorted. Sweep order is
    fixed, so the result is reproducible bit-for-bit.
    """
    a = np.array(A, dtype=float)
    n = a.shape[0]
    vecs = np.eye(n)
    scale = max(float(np.max(np.abs(a))), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q], rot[q, p] = s, -s
                a = rot.T @ a @ rot
                vecs = vecs @ rot
    return np.diag(a).copy(), vecs


def compliance_ellipsoid(Cc: ContactCompliance):
    """Principal axes (rows, unit) and radii (m/N, descending, >= 0)."""
    vals, vecs = jacobi_eigh(Cc.matrix)
    order = sorted(range(3), key=lambda i: (-vals[i], i))
    radii = np.array([max(vals[i], 0.0) for i in order])
    axes = np.array([vecs[:, i] for i in order])
    return axes, radii


@dataclass(frozen=True, eq=False)
class ActuatorModel:
    """Spring-damper actuators toward commanded targets.

    One command per actuator name. Each actuated joint follows
    ``ratio * command`` with its own stiffness, damping and saturation;
    coupling groups share one command between several joints.
    """

    names: tuple  # command names
    dofs: np.ndarray  # velocity index of each actuated joint
    qidx: np.ndarray  # position index of each actuated joint
    command: np.ndarray  # which command drives each actuated joint
    ratio: np.ndarray
    stiffness: np.ndarray
    damping: np.ndarray
    effort: np.ndarray
    grip: dict  # command name -> (open, close) command values
    joint_names: tuple = ()

    @property
    def n_commands(self) -> int:
        return len(self.names)

    def joint_compliance(self) -> JointCompliance:
        return JointCompliance(np.diag(1.0 / self.stiffness), tuple(self.dofs))

    def with_compliance_scale(self, factor: float) -> ActuatorModel:
        """Same actuators with joint compliance multiplied by ``factor``."""
        return ActuatorModel(
            self.names, self.dofs, self.qidx, self.command, self.ratio,
            self.stiffness / factor, self.damping, self.effort, self.grip, self.joint_names,
        )

    def command_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no actuator {name!r}") from None

    def commands_from_state(self, state: State) -> np.ndarray:
        """Commands that hold the current joint positions."""
        out = np.zeros(self.n_commands)
        seen = set()
        for k in range(len(self.dofs)):
            c = self.command[k]
            if c not in seen:
                out[c] = state.q[self.qidx[k]] / self.ratio[k]
                seen.add(c)
        return out


def build_actuators(model: ModelDef) -> ActuatorModel:
    topo = model.topology
    names, dofs, qidx, cmd, ratio, k, d, eff, jn = [], [], [], [], [], [], [], [], []
    grip = {}
    for i, link in enumerate(model.links):
        j = link.joint
        if not j.actuated:
            continue
        group, r = j.coupling if j.coupling else (j.name, 1.0)
        if group not in names:
            names.append(group)
            if j.grip is not None:
                grip[group] = (j.grip[0] / r, j.grip[1] / r)
        dofs.append(topo.v_adr[i])
        qidx.append(topo.q_adr[i])
        cmd.append(names.index(group))
        ratio.append(r)
        k.append(j.stiffness if j.stiffness is not None else DEFAULT_STIFFNESS)
        d.append(j.damping)
        eff.append(j.effort if j.effort is not None else np.inf)
        jn.append(j.name)
    as_f = lambda xs: np.array(xs, dtype=float)
    return ActuatorModel(
        tuple(names), np.array(dofs, dtype=int), np.array(qidx, dtype=int), np.array(cmd, dtype=int),
        as_f(ratio), as_f(k), as_f(d), as_f(eff), grip, tuple(jn),
    )


def actuation_terms(model: ModelDef, act: ActuatorModel, state: State, commands):
    """Split actuation into (explicit torque, implicit stiffness, implicit damping) per dof.

    Unsaturated actuators contribute ``k (target - q)`` explicitly and their
    velocity-dependent parts implicitly; saturated ones contribute a constant
    ``+-effort``. Unactuated joints get implicit passive damping only.
    """
    commands = np.asarray(commands, dtype=float)
    if commands.shape != (act.n_commands,):
        raise ValueError(f"expected {act.n_commands} commands, got {commands.shape}")
    topo = model.topology
    nv = topo.nv
    tau = np.zeros(nv)
    K = np.zeros(nv)
    D = topo.passive_damping.copy()
    if len(act.dofs):
        target = act.ratio * commands[act.command]
        err = target - state.q[act.qidx]
        qd = state.v[act.dofs]
        raw = act.stiffness * err - act.damping * qd
        sat = np.abs(raw) > act.effort
        spring = np.where(sat, np.clip(raw, -act.effort, act.effort), act.stiffness * err)
        tau[act.dofs] = spring
        K[act.dofs] = np.where(sat, 0.0, act.stiffness)
        D[act.dofs] = np.where(sat, 0.0, act.damping)
    return tau, K, D


def actuator_torques(model: ModelDef, act: ActuatorModel, state: State, commands, t: float | None = None) -> np.ndarray:
    """Generalized joint forces ``clamp(k (target - q) - d qdot, +-effort)``;
    unactuated joints get passive damping ``-d qdot``."""
    commands = np.asarray(commands, dtype=float)
    if commands.shape != (act.n_commands,):
        raise ValueError(f"expected {act.n_commands} commands, got {commands.shape}")
    topo = model.topology
    tau = -topo.passive_damping * state.v
    base = topo.dofs[0]
    tau[base] = 0.0
    if len(act.dofs):
        target = act.ratio * commands[act.command]
        raw = act.stiffness * (target - state.q[act.qidx]) - act.damping * state.v[act.dofs]
        tau[act.dofs] = np.clip(raw, -act.effort, act.effort)
    return tau
