"""Collision detection against the handrail and a velocity-level contact solve.

Each contact gets an orthonormal basis (n, t1, t2) with ``n`` pointing from
the static geometry (or the higher-index link) toward the contacting link.
Per step the solver finds impulses ``p = (p_n, p_t)`` satisfying

    0 <= p_n  _|_  u_n - beta * depth / dt + r_n * p_n >= 0
    |p_t| <= mu * p_n, tangential velocity driven toward -R_t p_t

by projected Gauss-Seidel over 3x3 contact blocks, alternating the sweep
direction each iteration. ``r_n`` comes from the contact-frame compliance
``Ja Cq Ja^T`` plus the material's own ``1/stiffness``, divided by dt.
Tangential rows use only the material term: joint compliance there lets a
held grasp creep at a rate proportional to the grip force.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import cho_solve

from .compliance import ContactCompliance, JointCompliance, build_actuators
from .dynamics import StepTerms, ThrusterCommand, step_terms
from .spatial import cross3
from .model import Kinematics, Material, ModelDef, State, kinematics, point_jacobian_kin, _check_dims

STATIC = -1
_EPS = 1e-12


class UnsupportedPairError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ContactPoint:
    position: np.ndarray
    normal: np.ndarray
    depth: float
    link: int
    geom: int  # index into the link's geoms
    other: int  # other link index, or STATIC
    other_geom: int  # index into other link's geoms, or into model.static_geoms
    material: Material


@dataclass(frozen=True, eq=False)
class ContactImpulse:
    normal_impulse: float
    tangent_impulse: np.ndarray
    basis: np.ndarray  # rows n, t1, t2

    @property
    def vector(self) -> np.ndarray:
        """World-frame impulse on the contacting link."""
        return self.normal_impulse * self.basis[0] + self.tangent_impulse @ self.basis[1:]


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 50
    tolerance: float = 1e-8
    baumgarte: float = 0.2
    use_compliance: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")
        if not 0.0 <= self.baumgarte <= 1.0:
            raise ValueError("baumgarte factor must lie in [0, 1]")


@dataclass
class SolveDiagnostics:
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True


def combine_materials(a: Material, b: Material) -> Material:
    return Material(
        f"{a.name}+{b.name}",
        stiffness=1.0 / (1.0 / a.stiffness + 1.0 / b.stiffness),
        damping=max(a.damping, b.damping),
        friction=math.sqrt(a.friction * b.friction),
    )


def contact_basis(n) -> np.ndarray:
    """Rows (n, t1, t2); t1 = normalize(n x e) with e the axis of n's smallest component."""
    n = np.asarray(n, dtype=float)
    k = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[k] = 1.0
    t1 = cross3(n, e)
    t1 /= math.sqrt(t1 @ t1)
    return np.array([n, t1, cross3(n, t1)])



# ---------------------------------------------------------------------------
# narrow phase


def closest_segment_segment(p1, q1, p2, q2):
    """Closest points between segments [p1,q1] and [p2,q2].

    For parallel overlapping segments the midpoint of the overlap is used, so
    the answer is unique and symmetric.
    """
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    if a <= _EPS and e <= _EPS:
        return p1.copy(), p2.copy()
    if a <= _EPS:
        return p1.copy(), p2 + d2 * min(max(f / e, 0.0), 1.0)
    c = d1 @ r
    if e <= _EPS:
        return p1 + d1 * min(max(-c / a, 0.0), 1.0), p2.copy()
    b = d1 @ d2
    denom = a * e - b * b
    if denom <= 1e-12 * a * e:
        s0 = ((p2 - p1) @ d1) / a
        s1 = ((q2 - p1) @ d1) / a
        lo, hi = max(0.0, min(s0, s1)), min(1.0, max(s0, s1))
        s = 0.5 * (lo + hi) if lo <= hi else (0.0 if max(s0, s1) < 0.0 else 1.0)
        x1 = p1 + d1 * s
        t = min(max(((x1 - p2) @ d2) / e, 0.0), 1.0)
        return x1, p2 + d2 * t
    s = min(max((b * f - c * e) / denom, 0.0), 1.0)
    t = (b * s + f) / e
    if t < 0.0:
        t, s = 0.0, min(max(-c / a, 0.0), 1.0)
    elif t > 1.0:
        t, s = 1.0, min(max((b - c) / a, 0.0), 1.0)
    return p1 + d1 * s, p2 + d2 * t


def _any_perpendicular(a):
    return contact_basis(a)[1]


def point_cylinder(x, center, axis, radius, half_len):
    """Closest surface point, outward normal and signed distance of ``x`` to a solid cylinder."""
    d = x - center
    s = d @ axis
    radial = d - s * axis
    rho = math.sqrt(radial @ radial)
    if abs(s) <= half_len and rho <= radius:
        pen_side, pen_cap = radius - rho, half_len - abs(s)
        if pen_side <= pen_cap:
            n = radial / rho if rho > _EPS else _any_perpendicular(axis)
            return center + s * axis + n * radius, n, -pen_side
        n = axis if s >= 0.0 else -axis
        return x + n * pen_cap, n, -pen_cap
    sc = min(max(s, -half_len), half_len)
    rc = radial * (radius / rho) if rho > radius else radial
    q = center + sc * axis + rc
    diff = x - q
    dist = math.sqrt(diff @ diff)
    return q, diff / dist, dist


def _sphere_cylinder(center, r, cyl_c, cyl_a, cyl_r, cyl_h):
    q, n, sd = point_cylinder(center, cyl_c, cyl_a, cyl_r, cyl_h)
    depth = r - sd
    if depth < 0.0:
        return []
    return [(0.5 * (q + center - n * r), n, depth)]


def _capsule_cylinder(p0, p1, r, cyl_c, cyl_a, cyl_r, cyl_h):
    x, _ = closest_segment_segment(p0, p1, cyl_c - cyl_a * cyl_h, cyl_c + cyl_a * cyl_h)
    return _sphere_cylinder(x, r, cyl_c, cyl_a, cyl_r, cyl_h)


def _segments_pair(pa0, pa1, ra, pb0, pb1, rb, fallback_axis):
    xa, xb = closest_segment_segment(pa0, pa1, pb0, pb1)
    diff = xa - xb
    dist = math.sqrt(diff @ diff)
    depth = ra + rb - dist
    if depth < 0.0:
        return []
    n = diff / dist if dist > _EPS else _any_perpendicular(fallback_axis)
    return [(0.5 * ((xa - n * ra) + (xb + n * rb)), n, depth)]


def _box_cylinder(Rb, cb, half, cyl_c, cyl_a, cyl_r, cyl_h, samples: int = 9):
    """Box (on a link) against a cylinder: sample the cylinder axis inside the
    inflated box, keep up to four penetrating samples."""
    P0 = Rb.T @ (cyl_c - cyl_a * cyl_h - cb)
    P1 = Rb.T @ (cyl_c + cyl_a * cyl_h - cb)
    d = P1 - P0
    lo, hi = 0.0, 1.0
    for k in range(3):
        ext = half[k] + cyl_r
        if abs(d[k]) < _EPS:
            if abs(P0[k]) > ext:
                return []
            continue
        t0, t1 = (-ext - P0[k]) / d[k], (ext - P0[k]) / d[k]
        if t0 > t1:
            t0, t1 = t1, t0
        lo, hi = max(lo, t0), min(hi, t1)
        if lo > hi:
            return []
    ts = [lo] if hi - lo < 1e-9 else [lo + (hi - lo) * i / (samples - 1) for i in range(samples)]
    hits = []
    for t in ts:
        a = P0 + t * d
        b = np.clip(a, -half, half)
        if np.array_equal(a, b):
            k = int(np.argmin(half - np.abs(a)))
            n = np.zeros(3)
            n[k] = -1.0 if a[k] >= 0.0 else 1.0
            depth = cyl_r + (half[k] - abs(a[k]))
            b = a.copy()
            b[k] = -n[k] * half[k]
        else:
            diff = b - a
            dist = math.sqrt(diff @ diff)
            depth = cyl_r - dist
            if depth < 0.0:
                continue
            n = diff / dist
        pos = 0.5 * (b + a + n * cyl_r)
        hits.append((Rb @ pos + cb, Rb @ n, depth))
    if len(hits) > 4:
        m = len(hits) - 1
        hits = [hits[round(i * m / 3)] for i in range(4)]
    return hits


def _geom_world(kin: Kinematics, link: int, g):
    if link == STATIC:
        R, p = g.pose.R, g.pose.t
    else:
        Rl, pl = kin.R[link], kin.p[link]
        R, p = Rl @ g.pose.R, Rl @ g.pose.t + pl
    return R, p


def _segment(R, p, g):
    if g.shape == "sphere":
        return p, p, g.size[0]
    h = R[:, 2] * g.size[1]
    return p - h, p + h, g.size[0]


_ROUND = ("sphere", "capsule")


def _pair_link_static(kin, link, g, sg):
    if sg.shape != "cylinder" or g.shape not in ("sphere", "capsule", "box"):
        raise UnsupportedPairError(f"unsupported contact pair {g.shape}-{sg.shape}")
    Rs, ps = _geom_world(kin, STATIC, sg)
    a, cr, ch = Rs[:, 2], sg.size[0], sg.size[1]
    R, p = _geom_world(kin, link, g)
    if g.shape == "box":
        bound = math.sqrt(sum(h * h for h in g.size))
    else:
        bound = g.size[0] + (g.size[1] if g.shape == "capsule" else 0.0)
    # cheap reject on distance to the cylinder's axis segment
    s = min(max((p - ps) @ a, -ch), ch)
    off = p - ps - s * a
    if off @ off > (bound + cr) ** 2:
        return []
    if g.shape == "sphere":
        return _sphere_cylinder(p, g.size[0], ps, a, cr, ch)
    if g.shape == "capsule":
        p0, p1, r = _segment(R, p, g)
        return _capsule_cylinder(p0, p1, r, ps, a, cr, ch)
    return _box_cylinder(R, p, np.array(g.size), ps, a, cr, ch)


def _pair_links(kin, la, ga, lb, gb):
    if ga.shape not in _ROUND or gb.shape not in _ROUND:
        raise UnsupportedPairError(f"unsupported contact pair {ga.shape}-{gb.shape}")
    Ra, pa = _geom_world(kin, la, ga)
    Rb, pb = _geom_world(kin, lb, gb)
    a0, a1, ra = _segment(Ra, pa, ga)
    b0, b1, rb = _segment(Rb, pb, gb)
    return _segments_pair(a0, a1, ra, b0, b1, rb, Ra[:, 2])


def self_pairs(model: ModelDef):
    """(link a, geom a, link b, geom b) for geoms on links with no ancestor relation, a < b."""
    topo = model.topology
    out = []
    for ia, la in enumerate(model.links):
        for ib in range(ia + 1, topo.n):
            if topo.is_ancestor(ia, ib):
                continue
            lb = model.links[ib]
            for ka in range(len(la.geoms)):
                for kb in range(len(lb.geoms)):
                    out.append((ia, ka, ib, kb))
    return out


def _candidate_pairs(model: ModelDef) -> list:
    """Every geom pair to test, in output order, with its combined material.

    Cached on the (immutable) model instance.
    """
    cached = model.__dict__.get("_contact_pairs")
    if cached is not None:
        return cached
    mats = {m.name: m for m in model.materials}
    later = {}
    for ia, ka, ib, kb in self_pairs(model):
        later.setdefault((ia, ka), []).append((ib, kb))
    out = []
    for i, link in enumerate(model.links):
        for k, g in enumerate(link.geoms):
            for s, sg in enumerate(model.static_geoms):
                if sg.shape != "cylinder" or g.shape not in ("sphere", "capsule", "box"):
                    raise UnsupportedPairError(f"unsupported contact pair {g.shape}-{sg.shape} ({link.name})")
                out.append((i, k, STATIC, s, combine_materials(mats[g.material], mats[sg.material])))
            for ib, kb in later.get((i, k), ()):
                gb = model.links[ib].geoms[kb]
                if g.shape not in _ROUND or gb.shape not in _ROUND:
                    raise UnsupportedPairError(
                        f"unsupported contact pair {g.shape}-{gb.shape} ({link.name}, {model.links[ib].name})"
                    )
                out.append((i, k, ib, kb, combine_materials(mats[g.material], mats[gb.material])))
    model.__dict__["_contact_pairs"] = out
    return out


def detect_contacts_kin(model: ModelDef, kin: Kinematics) -> list:
    out = []
    for i, k, other, ko, mat in _candidate_pairs(model):
        g = model.links[i].geoms[k]
        if other == STATIC:
            hits = _pair_link_static(kin, i, g, model.static_geoms[ko])
        else:
            hits = _pair_links(kin, i, g, other, model.links[other].geoms[ko])
        for pos, n, depth in hits:
            out.append(ContactPoint(pos, n, depth, i, k, other, ko, mat))
    return out


def detect_contacts(model: ModelDef, state: State, poses=None) -> list:
    """All contacts at ``state``, ordered by link index then geom index.

    ``poses`` (from forward_kinematics) is accepted for interface symmetry;
    kinematics are recomputed from ``state`` either way.
    """
    _check_dims(model, state)
    return detect_contacts_kin(model, kinematics(model, state.q))


# ---------------------------------------------------------------------------
# solver


def contact_regularization(Cc: ContactCompliance, dt: float, direction=None):
    """Constraint-force-mixing term ``d^T Cc d / dt`` along ``direction``.

    With no direction, returns the values along the three coordinate axes.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    C = Cc.matrix
    if direction is None:
        return np.diag(C) / dt
    d = np.asarray(direction, dtype=float)
    return float(d @ C @ d) / dt


def _relative_jacobian(model, kin, c: ContactPoint):
    J = point_jacobian_kin(model, kin, c.link, c.position)
    if c.other != STATIC:
        J = J - point_jacobian_kin(model, kin, c.other, c.position)
    return J


@njit(cache=True)
def _pgs_kernel(W, u_free, bias, mu, reg_n, reg_t, max_iterations, tolerance):
    m = mu.shape[0]
    n3 = 3 * m
    p = np.zeros(n3)
    u = u_free.copy()
    inv_n = np.empty(m)
    tinv = np.empty((m, 2, 2))
    for i in range(m):
        k = 3 * i
        inv_n[i] = 1.0 / (W[k, k] + reg_n[i])
        a = W[k + 1, k + 1] + reg_t[i, 0, 0]
        b = W[k + 1, k + 2] + reg_t[i, 0, 1]
        c = W[k + 2, k + 1] + reg_t[i, 1, 0]
        d = W[k + 2, k + 2] + reg_t[i, 1, 1]
        det = a * d - b * c
        tinv[i, 0, 0] = d / det
        tinv[i, 0, 1] = -b / det
        tinv[i, 1, 0] = -c / det
        tinv[i, 1, 1] = a / det
    it = 0
    converged = False
    for it in range(1, max_iterations + 1):
        change = 0.0
        for step in range(m):
            # alternate sweep direction so no contact is systematically solved first
            i = step if it % 2 == 1 else m - 1 - step
            k = 3 * i
            pn = p[k]
            pn_new = pn - (u[k] - bias[i] + reg_n[i] * pn) * inv_n[i]
            if pn_new < 0.0:
                pn_new = 0.0
            dn = pn_new - pn
            if dn != 0.0:
                for j in range(n3):
                    u[j] += W[j, k] * dn
                p[k] = pn_new
            t1 = p[k + 1]
            t2 = p[k + 2]
            r1 = u[k + 1] + reg_t[i, 0, 0] * t1 + reg_t[i, 0, 1] * t2
            r2 = u[k + 2] + reg_t[i, 1, 0] * t1 + reg_t[i, 1, 1] * t2
            n1 = t1 - (tinv[i, 0, 0] * r1 + tinv[i, 0, 1] * r2)
            n2 = t2 - (tinv[i, 1, 0] * r1 + tinv[i, 1, 1] * r2)
            lim = mu[i] * pn_new
            mag = math.sqrt(n1 * n1 + n2 * n2)
            if mag > lim:
                if mag > 0.0:
                    n1 = n1 * lim / mag
                    n2 = n2 * lim / mag
                else:
                    n1 = 0.0
                    n2 = 0.0
            d1 = n1 - t1
            d2 = n2 - t2
            if d1 != 0.0 or d2 != 0.0:
                for j in range(n3):
                    u[j] += W[j, k + 1] * d1 + W[j, k + 2] * d2
                p[k + 1] = n1
                p[k + 2] = n2
            change = max(change, abs(dn), abs(d1), abs(d2))
        if change < tolerance:
            converged = True
            break
    return p.reshape(m, 3), it, converged


def pgs(W, u_free, bias, mu, reg_n, reg_t, cfg: SolverConfig):
    """Projected Gauss-Seidel on 3x3 contact blocks, contacts visited in order.

    W: (3m,3m) Delassus matrix in contact bases; u_free: contact-space
    velocity without impulses; bias: required normal separation velocity per
    contact; reg_n: normal regularization; reg_t: (m,2,2) tangential blocks.
    Each visit solves the normal row, clamps at zero, then solves the 2x2
    tangential block and projects it onto the friction disk. Sweeps alternate
    forward and backward through the contact list.
    Returns (impulses (m,3), iterations, converged).
    """
    f = lambda x: np.ascontiguousarray(x, dtype=np.float64)
    P, it, ok = _pgs_kernel(
        f(W), f(u_free), f(bias), f(mu), f(reg_n), f(np.reshape(reg_t, (-1, 2, 2))),
        int(cfg.max_iterations), float(cfg.tolerance),
    )
    return P, int(it), bool(ok)


@dataclass
class ContactSolution:
    impulses: list
    gen_impulse: np.ndarray
    spatial_impulse: np.ndarray
    diagnostics: SolveDiagnostics
    peak: float = 0.0


def solve_with_terms(model, kin, terms: StepTerms, contacts, Cq: JointCompliance | None, dt, cfg) -> ContactSolution:
    nv = model.nv
    m = len(contacts)
    if m == 0:
        return ContactSolution([], np.zeros(nv), np.zeros(6), SolveDiagnostics(0, 0.0, True))
    J = np.empty((3 * m, nv))
    bases, mu, bias, reg_n, reg_t = [], [], [], [], []
    cols = list(Cq.dofs) if Cq is not None and Cq.dofs else []
    for i, c in enumerate(contacts):
        B = contact_basis(c.normal)
        Jr = _relative_jacobian(model, kin, c)
        J[3 * i : 3 * i + 3] = B @ Jr
        C = np.eye(3) / c.material.stiffness
        if cfg.use_compliance and cols:
            Ja = Jr[:, cols]
            C = C + Ja @ Cq.matrix @ Ja.T
        Cb = B @ C @ B.T
        bases.append(B)
        mu.append(c.material.friction)
        bias.append(cfg.baumgarte * c.depth / dt)
        reg_n.append(Cb[0, 0] / dt)
        # tangential rows keep only the material term: joint compliance there would
        # let a loaded contact creep at a rate proportional to force
        reg_t.append([[1.0 / (c.material.stiffness * dt), 0.0], [0.0, 1.0 / (c.material.stiffness * dt)]])
    X = cho_solve(terms.chol, J.T)
    W = J @ X
    u_free = J @ terms.v_free
    P, iters, converged = pgs(W, u_free, bias, mu, reg_n, reg_t, cfg)
    u = u_free + W @ P.reshape(-1)
    residual = 0.0
    for i in range(m):
        w = u[3 * i] - bias[i] + reg_n[i] * P[i, 0]
        residual += abs(P[i, 0] * max(0.0, w))
    impulses = [ContactImpulse(float(P[i, 0]), P[i, 1:].copy(), bases[i]) for i in range(m)]
    gen = J.T @ P.reshape(-1)
    spatial = np.zeros(6)
    for c, imp in zip(contacts, impulses):
        if c.other == STATIC:
            vec = imp.vector
            spatial[:3] += cross3(c.position, vec)
            spatial[3:] += vec
    peak = float(P[:, 0].max())
    return ContactSolution(impulses, gen, spatial, SolveDiagnostics(iters, residual, converged), peak)


def solve_contacts(
    model: ModelDef,
    state: State,
    contacts,
    tau=None,
    thrust: ThrusterCommand | None = None,
    dt: float = 1e-3,
    cfg: SolverConfig = SolverConfig(),
    *,
    compliance: JointCompliance | None = None,
    stiffness=None,
    damping=None,
    diagnostics: SolveDiagnostics | None = None,
) -> list:
    """Contact impulses for one step of ``forward_dynamics`` with the same inputs.

    ``compliance`` defaults to the model's actuator compliance (diag 1/k).
    """
    _check_dims(model, state)
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    kin = kinematics(model, state.q)
    if tau is None:
        tau = np.zeros(model.nv)
    thrust_gen = thrust.world_generalized(kin) if thrust is not None and thrust.active(state.t) else None
    terms = step_terms(model, state, tau, thrust_gen, dt, stiffness, damping, None, kin)
    if compliance is None:
        act = build_actuators(model)
        compliance = act.joint_compliance() if len(act.dofs) else None
    sol = solve_with_terms(model, kin, terms, list(contacts), compliance, dt, cfg)
    if diagnostics is not None:
        diagnostics.iterations = sol.diagnostics.iterations
        diagnostics.residual = sol.diagnostics.residual
        diagnostics.converged = sol.diagnostics.converged
    return sol.impulses
