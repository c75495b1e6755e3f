"""Floating-base rigid-body dynamics.

All spatial quantities are world-frame, referenced to the world origin, with
(angular; linear) ordering. The free base uses (v_base_origin, omega) as its
six velocity coordinates, both in world axes, so its generalized force is
(force, torque about the base origin).

The time step is semi-implicit Euler. Joint springs and dampers can be
folded in implicitly (``stiffness``/``damping`` diagonals). After the
positions are advanced, the base velocity is re-solved so that total spatial
momentum equals its pre-step value plus the external impulses of the step;
without that correction explicit Coriolis terms leak O(dt^2) momentum per
step whenever the arm moves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .model import Kinematics, ModelDef, State, clamp_to_limits, integrate_positions, kinematics, _check_dims
from .spatial import Wrench, cross3

ZERO3 = np.zeros(3)


class NumericalError(RuntimeError):
    """Raised when the mass matrix is not positive definite."""


@dataclass(frozen=True, eq=False)
class ThrusterCommand:
    """Ideal thrust wrench on the base, in base-frame axes, about the base origin."""

    wrench: Wrench = field(default_factory=lambda: Wrench(ZERO3, ZERO3))
    t0: float = -np.inf
    t1: float = np.inf

    def active(self, t: float) -> bool:
        return self.t0 <= t < self.t1

    def world_generalized(self, kin: Kinematics) -> np.ndarray:
        """(force, torque) in world axes; zero outside the active window is the caller's job."""
        R = kin.R[0]
        return np.concatenate([R @ self.wrench.force, R @ self.wrench.torque])


NO_THRUST = ThrusterCommand()


@dataclass(frozen=True, eq=False)
class MomentumRecord:
    linear: np.ndarray
    angular: np.ndarray  # about the world origin
    t: float = 0.0


def _cross(a, b):
    """Row-wise cross product of (..., 3) arrays (np.cross is slow on tiny inputs)."""
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def _motion_cross(V, M):
    """Row-wise V x M for spatial motion vectors (..., 6)."""
    w, v = V[..., :3], V[..., 3:]
    return np.concatenate([_cross(w, M[..., :3]), _cross(w, M[..., 3:]) + _cross(v, M[..., :3])], axis=-1)


def _force_cross(V, F):
    """Row-wise V x* F for a motion vector V and force vector F (..., 6)."""
    w, v = V[..., :3], V[..., 3:]
    return np.concatenate([_cross(w, F[..., :3]) + _cross(v, F[..., 3:]), _cross(w, F[..., 3:])], axis=-1)


def composite_inertias(model: ModelDef, kin: Kinematics) -> np.ndarray:
    topo = model.topology
    Ic = kin.inertia.copy()
    for i in range(topo.n - 1, 0, -1):
        Ic[topo.parent[i]] += Ic[i]
    return Ic


def _link_jacobians(model: ModelDef, kin: Kinematics) -> np.ndarray:
    """(n,6,nv): column d of link i is S_d when dof d lies on the root path of i."""
    return kin.S[None, :, :] * model.topology.path_mask[:, None, :]


def _crba(model: ModelDef, kin: Kinematics) -> np.ndarray:
    # sum_i J_i^T I_i J_i; equal to the composite-inertia recursion, one batched product
    J = _link_jacobians(model, kin)
    M = np.einsum("nai,naj->ij", J, kin.inertia @ J)
    return 0.5 * (M + M.T)


def mass_matrix(model: ModelDef, state: State) -> np.ndarray:
    """Joint-space inertia M with kinetic energy = 1/2 v^T M v (composite-rigid-body)."""
    _check_dims(model, state)
    kin = kinematics(model, state.q)
    return _crba(model, kin)


def _rnea_bias(model: ModelDef, kin: Kinematics, v: np.ndarray, gravity=None) -> np.ndarray:
    """Recursive Newton-Euler with zero joint acceleration, written as batched sums
    over root paths (all quantities are world-origin, so no frame changes)."""
    topo = model.topology
    mask = topo.path_mask
    V = (mask * v) @ kin.S.T  # (n,6) link velocities
    d = topo.v_adr[0]
    vb, wb = v[d : d + 3], v[d + 3 : d + 6]
    g = ZERO3 if gravity is None else np.asarray(gravity, dtype=float)
    a0 = np.concatenate([ZERO3, cross3(vb, wb) - g])
    jd = topo.joint_dofs
    if jd:
        Sv = (kin.S[:, jd] * v[jd]).T  # (k,6)
        c = _motion_cross(V[topo.dof_link[jd]], Sv)
        A = a0 + mask[:, jd] @ c
    else:
        A = np.broadcast_to(a0, V.shape)
    IV = np.einsum("nij,nj->ni", kin.inertia, V)
    f = np.einsum("nij,nj->ni", kin.inertia, A) + _force_cross(V, IV)
    F = mask.T.astype(float) @ f  # (nv,6) force transmitted through each dof
    return np.einsum("kd,dk->d", kin.S, F)


def bias_forces(model: ModelDef, state: State, gravity=None) -> np.ndarray:
    """Coriolis/centrifugal (and optional gravity) generalized forces, recursive Newton-Euler."""
    _check_dims(model, state)
    return _rnea_bias(model, kinematics(model, state.q), state.v, gravity)


def link_velocities(model: ModelDef, kin: Kinematics, v: np.ndarray) -> np.ndarray:
    """(n,6) world-origin spatial velocity of every link."""
    return (model.topology.path_mask * v) @ kin.S.T


def spatial_momentum(model: ModelDef, kin: Kinematics, v: np.ndarray) -> np.ndarray:
    """Total (angular about origin; linear) momentum."""
    Vs = link_velocities(model, kin, v)
    return np.einsum("nij,nj->i", kin.inertia, Vs)


def total_momentum(model: ModelDef, state: State) -> MomentumRecord:
    _check_dims(model, state)
    h = spatial_momentum(model, kinematics(model, state.q), state.v)
    return MomentumRecord(h[3:].copy(), h[:3].copy(), state.t)


def kinetic_energy(model: ModelDef, state: State) -> float:
    kin = kinematics(model, state.q)
    Vs = link_velocities(model, kin, state.v)
    return 0.5 * float(np.einsum("ni,nij,nj->", Vs, kin.inertia, Vs))


def _wrench_about_origin(point, force) -> np.ndarray:
    return np.concatenate([cross3(point, force), force])


@dataclass
class StepTerms:
    """Per-step quantities shared by the contact solve and the integrator."""

    kin: Kinematics
    M: np.ndarray
    bias: np.ndarray
    chol: tuple
    v_free: np.ndarray
    external: np.ndarray  # spatial impulse at world origin from thrust (+gravity) over dt


def step_terms(model, state, tau, thrust_gen, dt, stiffness=None, damping=None, gravity=None, kin=None) -> StepTerms:
    """Factor the implicit mass matrix and compute the contact-free next velocity.

    ``thrust_gen`` is the base generalized force (world force, world torque about
    the base origin), or None.
    """
    topo = model.topology
    if kin is None:
        kin = kinematics(model, state.q)
    M = _crba(model, kin)
    bias = _rnea_bias(model, kin, state.v, gravity)
    Mt = M.copy()
    diag = np.zeros(topo.nv)
    if damping is not None:
        diag += dt * damping
    if stiffness is not None:
        diag += dt * dt * stiffness
    Mt[np.diag_indices(topo.nv)] += diag
    try:
        chol = cho_factor(Mt, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(f"mass matrix is not positive definite: {exc}") from None
    f = np.asarray(tau, dtype=float) - bias
    external = np.zeros(6)
    if thrust_gen is not None:
        d = topo.v_adr[0]
        f[d : d + 6] += thrust_gen
        pb = kin.p[0]
        external += dt * np.concatenate([thrust_gen[3:] + cross3(pb, thrust_gen[:3]), thrust_gen[:3]])
    if gravity is not None and np.any(gravity):
        g = np.asarray(gravity, dtype=float)
        for i in range(topo.n):
            external += dt * _wrench_about_origin(kin.com[i], topo.mass[i] * g)
    v_free = cho_solve(chol, M @ state.v + dt * f)
    return StepTerms(kin, M, bias, chol, v_free, external)


def finish_step(model: ModelDef, state: State, terms: StepTerms, gen_impulse, spatial_impulse, dt: float):
    """Apply solved contact impulses, advance positions, restore momentum. Returns (State, Kinematics)."""
    topo = model.topology
    v_new = terms.v_free.copy()
    if gen_impulse is not None:
        v_new += cho_solve(terms.chol, gen_impulse)
    h_target = spatial_momentum(model, terms.kin, state.v) + terms.external
    if spatial_impulse is not None:
        h_target = h_target + spatial_impulse
    q_new = integrate_positions(model, state.q, v_new, dt)
    clamp_to_limits(model, q_new, v_new)
    kin_new = kinematics(model, q_new)
    d = topo.dofs[0]
    vj = v_new.copy()
    vj[d] = 0.0
    h_joint = spatial_momentum(model, kin_new, vj)
    A = kin_new.inertia.sum(axis=0) @ kin_new.S[:, d]
    v_new[d] = np.linalg.solve(A, h_target - h_joint)
    return State(q_new, v_new, state.t + dt), kin_new


def forward_dynamics(
    model: ModelDef,
    state: State,
    tau,
    contact_impulses=(),
    thrust: ThrusterCommand | None = None,
    dt: float = 1e-3,
    *,
    stiffness=None,
    damping=None,
    gravity=None,
) -> State:
    """One semi-implicit step.

    ``contact_impulses`` holds (world point, link index or name, world impulse)
    triples already produced by the contact solver. ``stiffness``/``damping``
    are optional per-dof diagonals treated implicitly.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    _check_dims(model, state)
    kin = kinematics(model, state.q)
    thrust_gen = thrust.world_generalized(kin) if thrust is not None and thrust.active(state.t) else None
    terms = step_terms(model, state, tau, thrust_gen, dt, stiffness, damping, gravity, kin)
    gen = None
    spatial = None
    if contact_impulses:
        from .model import point_jacobian_kin

        gen = np.zeros(model.nv)
        spatial = np.zeros(6)
        for point, link, impulse in contact_impulses:
            idx = model.link_index(link) if isinstance(link, str) else int(link)
            x = np.asarray(point, dtype=float)
            p = np.asarray(impulse, dtype=float)
            gen += point_jacobian_kin(model, kin, idx, x).T @ p
            spatial += _wrench_about_origin(x, p)
    new, _ = finish_step(model, state, terms, gen, spatial, dt)
    return new


def translational_step(mass: float, velocity, thrust_force, contact_forces, dt: float) -> np.ndarray:
    """Point-mass base model: m dv/dt = F_thr - sum f_c (explicit Euler velocity update)."""
    f = np.asarray(thrust_force, dtype=float) - sum((np.asarray(c, dtype=float) for c in contact_forces), ZERO3)
    return np.asarray(velocity, dtype=float) + dt * f / mass
