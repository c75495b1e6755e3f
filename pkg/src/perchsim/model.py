"""Kinematic-tree model definition, model-file text format, kinematics.

Model-file lines (``#`` starts a comment)::

    material <name> stiffness=<N/m> damping=<N s/m> friction=<mu>
    link <name> parent=<name|world> joint=<free|revolute|prismatic|fixed>
         axis=<x,y,z> pos=<x,y,z> quat=<w,x,y,z> mass=<kg> com=<x,y,z>
         inertia=<ixx,iyy,izz,ixy,ixz,iyz> [limits=<lo,hi>] [damping=<d>]
         [actuated] [couple=<group>:<ratio>] [stiffness=<k>] [effort=<tau_max>]
         [grip=<open,close>]
    geom <link|world> shape=<sphere|capsule|cylinder|box> size=<...>
         pos=<x,y,z> quat=<w,x,y,z> material=<name>

Each ``link`` line is a single physical line. The joint shares its link's
name. Generalized coordinates: the free root contributes 7 positions
(translation, then quaternion w,x,y,z) and 6 velocities (world-frame linear
velocity of the base origin, then world-frame angular velocity); every other
non-fixed joint contributes one of each.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .spatial import Pose, Quaternion, SpatialInertia, quat_to_matrix, skew

JOINT_KINDS = ("free", "revolute", "prismatic", "fixed")
SHAPE_SIZES = {"sphere": 1, "capsule": 2, "cylinder": 2, "box": 3}
WORLD = "world"

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*\Z")


class ModelError(ValueError):
    """Model-file or model-structure error, optionally tagged with a position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class ModelSyntaxError(ModelError):
    pass


class ModelSemanticError(ModelError):
    pass


@dataclass(frozen=True)
class Material:
    name: str
    stiffness: float = 1.0e5
    damping: float = 0.0
    friction: float = 0.8

    def __post_init__(self):
        if not self.stiffness > 0.0:
            raise ModelSemanticError(f"material {self.name}: stiffness must be positive")
        if not self.damping >= 0.0 or not self.friction >= 0.0:
            raise ModelSemanticError(f"material {self.name}: damping and friction must be >= 0")


@dataclass(frozen=True)
class JointDef:
    name: str
    kind: str
    axis: tuple = (0.0, 0.0, 1.0)
    limits: tuple | None = None
    damping: float = 0.0
    actuated: bool = False
    coupling: tuple | None = None  # (group, ratio)
    stiffness: float | None = None
    effort: float | None = None
    grip: tuple | None = None  # (open target, close target)

    @property
    def nq(self) -> int:
        return {"free": 7, "fixed": 0}.get(self.kind, 1)

    @property
    def nv(self) -> int:
        return {"free": 6, "fixed": 0}.get(self.kind, 1)


@dataclass(frozen=True)
class GeomDef:
    shape: str
    size: tuple
    pose: Pose = field(default_factory=Pose)
    material: str = "default"

    def __post_init__(self):
        if self.shape not in SHAPE_SIZES:
            raise ModelSemanticError(f"unknown shape {self.shape!r}")
        if len(self.size) != SHAPE_SIZES[self.shape]:
            raise ModelSemanticError(f"{self.shape} takes {SHAPE_SIZES[self.shape]} size values")
        if not all(s > 0.0 for s in self.size):
            raise ModelSemanticError("geom sizes must be positive")


@dataclass(frozen=True)
class LinkDef:
    name: str
    parent: str  # link name or "world"
    joint: JointDef
    mass: float
    com: tuple = (0.0, 0.0, 0.0)
    inertia: tuple = (1.0, 1.0, 1.0, 0.0, 0.0, 0.0)  # ixx iyy izz ixy ixz iyz, about COM
    joint_pose: Pose = field(default_factory=Pose)
    geoms: tuple = ()

    @property
    def rot_inertia(self) -> np.ndarray:
        ixx, iyy, izz, ixy, ixz, iyz = self.inertia
        return np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])

    @property
    def spatial_inertia(self) -> SpatialInertia:
        return SpatialInertia(self.mass, self.com, self.rot_inertia)


@dataclass(frozen=True)
class ModelDef:
    links: tuple
    materials: tuple = ()
    static_geoms: tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "materials", tuple(self.materials))
        object.__setattr__(self, "static_geoms", tuple(self.static_geoms))
        problems = check_model(self)
        if problems:
            raise ModelSemanticError(problems[0][1])

    def material(self, name: str) -> Material:
        for m in self.materials:
            if m.name == name:
                return m
        raise KeyError(name)

    def link_index(self, name: str) -> int:
        try:
            return self.topology.index[name]
        except KeyError:
            raise KeyError(f"unknown link {name!r}") from None

    @property
    def nq(self) -> int:
        return self.topology.nq

    @property
    def nv(self) -> int:
        return self.topology.nv

    @cached_property
    def topology(self) -> Topology:
        return Topology(self)

    def default_state(self) -> State:
        """Base at its declared home pose, joints at zero (clamped into limits), at rest."""
        topo = self.topology
        q = np.zeros(topo.nq)
        root = self.links[0]
        q[0:3] = root.joint_pose.translation
        rq = root.joint_pose.rotation
        q[3:7] = (rq.w, rq.x, rq.y, rq.z)
        for i, link in enumerate(self.links):
            if link.joint.kind in ("revolute", "prismatic") and link.joint.limits:
                lo, hi = link.joint.limits
                q[topo.q_adr[i]] = min(max(0.0, lo), hi)
        return State(q, np.zeros(topo.nv), 0.0)

    def with_link(self, name: str, **changes) -> ModelDef:
        links = tuple(replace(l, **changes) if l.name == name else l for l in self.links)
        return replace(self, links=links)


def check_model(model: ModelDef) -> list:
    """Return ``[(link_index or None, message), ...]`` of structural problems."""
    out = []
    seen: dict = {}
    for i, link in enumerate(model.links):
        j = link.joint
        if link.name in seen or link.name == WORLD:
            out.append((i, f"duplicate link name {link.name!r}"))
        if j.kind not in JOINT_KINDS:
            out.append((i, f"unknown joint kind {j.kind!r}"))
        if j.kind == "free" and (i != 0 or link.parent != WORLD):
            out.append((i, f"free joint on {link.name!r} must be the root link"))
        if i == 0 and j.kind != "free":
            out.append((i, "the root link must carry the free joint"))
        if i > 0 and link.parent not in seen:
            what = "world" if link.parent == WORLD else repr(link.parent)
            out.append((i, f"parent {what} of {link.name!r} is not an earlier link (cycle or forward reference)"))
        if not (math.isfinite(link.mass) and link.mass > 0.0):
            out.append((i, f"link {link.name!r}: mass must be positive"))
        else:
            try:
                link.spatial_inertia
            except ValueError as exc:
                out.append((i, f"link {link.name!r}: {exc}"))
        if j.kind in ("revolute", "prismatic"):
            n = math.sqrt(sum(a * a for a in j.axis))
            if abs(n - 1.0) > 1e-9:
                out.append((i, f"joint {j.name!r}: axis must be unit length"))
        if j.limits is not None and not j.limits[0] <= j.limits[1]:
            out.append((i, f"joint {j.name!r}: limits lo > hi"))
        if j.damping < 0.0:
            out.append((i, f"joint {j.name!r}: damping must be >= 0"))
        if j.stiffness is not None and not j.stiffness > 0.0:
            out.append((i, f"joint {j.name!r}: stiffness must be positive"))
        if j.effort is not None and not j.effort > 0.0:
            out.append((i, f"joint {j.name!r}: effort must be positive"))
        if (j.coupling or j.stiffness or j.effort or j.grip) and not j.actuated:
            out.append((i, f"joint {j.name!r}: actuator attributes on an unactuated joint"))
        if j.actuated and j.kind not in ("revolute", "prismatic"):
            out.append((i, f"joint {j.name!r}: only revolute/prismatic joints can be actuated"))
        for g in link.geoms:
            if g.material not in {m.name for m in model.materials}:
                out.append((i, f"unknown material {g.material!r}"))
        seen[link.name] = i
    if not model.links:
        out.append((None, "model has no links"))
    names = [m.name for m in model.materials]
    if len(set(names)) != len(names):
        out.append((None, "duplicate material name"))
    for g in model.static_geoms:
        if g.material not in names:
            out.append((None, f"unknown material {g.material!r}"))
    groups = {}
    for link in model.links:
        if link.joint.coupling:
            groups.setdefault(link.joint.coupling[0], []).append(link.name)
    for g in groups:
        if g in seen:
            out.append((None, f"coupling group {g!r} clashes with a joint name"))
    return out


@dataclass
class State:
    q: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def copy(self) -> State:
        return State(self.q.copy(), self.v.copy(), self.t)


class Topology:
    """Index tables and constant arrays derived once from a ModelDef."""

    def __init__(self, model: ModelDef):
        links = model.links
        n = len(links)
        self.n = n
        self.index = {l.name: i for i, l in enumerate(links)}
        self.parent = [self.index.get(l.parent, -1) for l in links]
        self.kind = [l.joint.kind for l in links]
        self.q_adr, self.v_adr = [], []
        nq = nv = 0
        for l in links:
            self.q_adr.append(nq)
            self.v_adr.append(nv)
            nq += l.joint.nq
            nv += l.joint.nv
        self.nq, self.nv = nq, nv
        self.axis = np.array([l.joint.axis for l in links], dtype=float)
        self.jR = np.array([l.joint_pose.R for l in links])
        self.jp = np.array([l.joint_pose.translation for l in links])
        self.axis_skew = np.array([skew(a) for a in self.axis])
        self.axis_skew2 = np.array([k @ k for k in self.axis_skew])
        self.mass = np.array([l.mass for l in links])
        self.com = np.array([l.com for l in links], dtype=float)
        self.rot_inertia = np.array([l.rot_inertia for l in links])
        self.children = [[] for _ in range(n)]
        for i, p in enumerate(self.parent):
            if p >= 0:
                self.children[p].append(i)
        # ancestors-or-self chain for each link, root first
        self.chain = []
        for i in range(n):
            c, k = [], i
            while k >= 0:
                c.append(k)
                k = self.parent[k]
            self.chain.append(c[::-1])
        self.dofs = [list(range(self.v_adr[i], self.v_adr[i] + links[i].joint.nv)) for i in range(n)]
        self.path_mask = np.zeros((n, nv), dtype=bool)
        for i in range(n):
            for k in self.chain[i]:
                self.path_mask[i, self.dofs[k]] = True
        # per-dof joint data (free-base dofs carry NaN / zero)
        self.dof_link = np.full(nv, -1)
        self.lo = np.full(nv, -np.inf)
        self.hi = np.full(nv, np.inf)
        self.passive_damping = np.zeros(nv)
        self.dof_q = np.full(nv, -1)
        for i, l in enumerate(links):
            if l.joint.kind in ("revolute", "prismatic"):
                d = self.v_adr[i]
                self.dof_link[d] = i
                self.dof_q[d] = self.q_adr[i]
                self.passive_damping[d] = l.joint.damping
                if l.joint.limits is not None:
                    self.lo[d], self.hi[d] = l.joint.limits
        self.joint_dofs = [d for d in range(nv) if self.dof_link[d] >= 0]
        self.joint_names = [links[self.dof_link[d]].joint.name for d in self.joint_dofs]
        self.geoms = [(i, g) for i, l in enumerate(links) for g in l.geoms]

    def is_ancestor(self, a: int, b: int) -> bool:
        """True if link ``a`` is on the root path of link ``b`` (or a == b)."""
        return a in self.chain[b]


_EYE3 = np.eye(3)


@dataclass
class Kinematics:
    """World-frame kinematic quantities of every link at one configuration.

    ``S`` holds every joint's motion subspace as world-origin spatial vectors
    (angular; linear), one column per velocity coordinate.
    """

    R: np.ndarray  # (n,3,3) link orientations
    p: np.ndarray  # (n,3) link origins
    S: np.ndarray  # (6,nv)
    com: np.ndarray  # (n,3) world COM
    inertia: np.ndarray  # (n,6,6) world-origin spatial inertias


def kinematics(model: ModelDef, q: np.ndarray) -> Kinematics:
    topo = model.topology
    n = topo.n
    R = np.empty((n, 3, 3))
    p = np.empty((n, 3))
    S = np.zeros((6, topo.nv))
    for i in range(n):
        kind = topo.kind[i]
        if kind == "free":
            a = topo.q_adr[i]
            w, x, y, z = q[a + 3 : a + 7]
            R[i] = quat_to_matrix(w, x, y, z)
            p[i] = q[a : a + 3]
            d = topo.v_adr[i]
            S[3:6, d : d + 3] = _EYE3
            S[0:3, d + 3 : d + 6] = _EYE3
            S[3:6, d + 3 : d + 6] = skew(p[i])
            continue
        par = topo.parent[i]
        Rj = R[par] @ topo.jR[i]
        o = R[par] @ topo.jp[i] + p[par]
        if kind == "fixed":
            R[i], p[i] = Rj, o
            continue
        qi = q[topo.q_adr[i]]
        a = Rj @ topo.axis[i]
        d = topo.v_adr[i]
        if kind == "revolute":
            s, c = math.sin(qi), math.cos(qi)
            R[i] = Rj @ (_EYE3 + s * topo.axis_skew[i] + (1.0 - c) * topo.axis_skew2[i])
            p[i] = o
            S[0:3, d] = a
            S[3:6, d] = (o[1] * a[2] - o[2] * a[1], o[2] * a[0] - o[0] * a[2], o[0] * a[1] - o[1] * a[0])
        else:
            R[i] = Rj
            p[i] = o + a * qi
            S[3:6, d] = a
    com = np.einsum("nij,nj->ni", R, topo.com) + p
    m = topo.mass
    Ic = R @ topo.rot_inertia @ R.transpose(0, 2, 1)
    C = np.zeros((n, 3, 3))
    C[:, 0, 1], C[:, 0, 2], C[:, 1, 2] = -com[:, 2], com[:, 1], -com[:, 0]
    C[:, 1, 0], C[:, 2, 0], C[:, 2, 1] = com[:, 2], -com[:, 1], com[:, 0]
    mC = m[:, None, None] * C
    inertia = np.empty((n, 6, 6))
    inertia[:, :3, :3] = Ic - mC @ C
    inertia[:, :3, 3:] = mC
    inertia[:, 3:, :3] = -mC
    inertia[:, 3:, 3:] = m[:, None, None] * _EYE3
    return Kinematics(R, p, S, com, inertia)


def _check_dims(model: ModelDef, state: State):
    if state.q.shape != (model.nq,) or state.v.shape != (model.nv,):
        raise ValueError(
            f"state dimensions q{state.q.shape} v{state.v.shape} do not match model (nq={model.nq}, nv={model.nv})"
        )


def forward_kinematics(model: ModelDef, state: State) -> list:
    """World pose of every link, in model order."""
    _check_dims(model, state)
    kin = kinematics(model, state.q)
    poses = []
    for i in range(model.topology.n):
        if i == 0:
            a = model.topology.q_adr[0]
            poses.append(Pose(Quaternion(*state.q[a + 3 : a + 7]), tuple(state.q[a : a + 3])))
        else:
            poses.append(Pose.from_rt(kin.R[i], kin.p[i]))
    return poses


def link_jacobian(model: ModelDef, kin: Kinematics, link: int) -> np.ndarray:
    """6 x nv spatial Jacobian (world origin, angular; linear) of one link."""
    return kin.S * model.topology.path_mask[link]


def point_jacobian_kin(model: ModelDef, kin: Kinematics, link: int, point) -> np.ndarray:
    S = kin.S
    x = point
    lin = S[3:6] - np.array(
        [x[1] * S[2] - x[2] * S[1], x[2] * S[0] - x[0] * S[2], x[0] * S[1] - x[1] * S[0]]
    )
    return lin * model.topology.path_mask[link]


def point_jacobian(model: ModelDef, state: State, link, point) -> np.ndarray:
    """3 x nv Jacobian of the world velocity of the material point of ``link``
    currently at world position ``point``."""
    _check_dims(model, state)
    idx = model.link_index(link) if isinstance(link, str) else int(link)
    if not 0 <= idx < model.topology.n:
        raise KeyError(f"unknown link index {link}")
    kin = kinematics(model, state.q)
    return point_jacobian_kin(model, kin, idx, np.asarray(point, dtype=float))


def integrate_positions(model: ModelDef, q: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
    """q advanced by velocity v for dt; base orientation by the exact exponential map."""
    topo = model.topology
    out = q.copy()
    a, d = topo.q_adr[0], topo.v_adr[0]
    out[a : a + 3] = q[a : a + 3] + dt * v[d : d + 3]
    w = v[d + 3 : d + 6]
    if w.any():
        rot = Quaternion.from_rotation_vector(w * dt) * Quaternion(*q[a + 3 : a + 7])
        out[a + 3 : a + 7] = (rot.w, rot.x, rot.y, rot.z)
    jd = topo.joint_dofs
    out[topo.dof_q[jd]] = q[topo.dof_q[jd]] + dt * v[jd]
    return out


def clamp_to_limits(model: ModelDef, q: np.ndarray, v: np.ndarray):
    """Inelastic joint stops: clamp positions and zero velocity into the limit. In place."""
    topo = model.topology
    for d in topo.joint_dofs:
        qa = topo.dof_q[d]
        if q[qa] < topo.lo[d]:
            q[qa] = topo.lo[d]
            if v[d] < 0.0:
                v[d] = 0.0
        elif q[qa] > topo.hi[d]:
            q[qa] = topo.hi[d]
            if v[d] > 0.0:
                v[d] = 0.0


# ---------------------------------------------------------------------------
# text format


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_list(xs) -> str:
    return ",".join(_fmt(x) for x in xs)


def _fmt_pose(pose: Pose) -> str:
    r = pose.rotation
    return f"pos={_fmt_list(pose.translation)} quat={_fmt_list((r.w, r.x, r.y, r.z))}"


def _fmt_geom(target: str, g: GeomDef) -> str:
    return f"geom {target} shape={g.shape} size={_fmt_list(g.size)} {_fmt_pose(g.pose)} material={g.material}"


def serialize_model(model: ModelDef) -> str:
    lines = []
    if model.name:
        lines.append(f"# model {model.name}")
    for m in model.materials:
        lines.append(
            f"material {m.name} stiffness={_fmt(m.stiffness)} damping={_fmt(m.damping)} friction={_fmt(m.friction)}"
        )
    for link in model.links:
        j = link.joint
        parts = [
            f"link {link.name} parent={link.parent} joint={j.kind} axis={_fmt_list(j.axis)}",
            _fmt_pose(link.joint_pose),
            f"mass={_fmt(link.mass)} com={_fmt_list(link.com)} inertia={_fmt_list(link.inertia)}",
        ]
        if j.limits is not None:
            parts.append(f"limits={_fmt_list(j.limits)}")
        if j.damping:
            parts.append(f"damping={_fmt(j.damping)}")
        if j.actuated:
            parts.append("actuated")
        if j.coupling is not None:
            parts.append(f"couple={j.coupling[0]}:{_fmt(j.coupling[1])}")
        if j.stiffness is not None:
            parts.append(f"stiffness={_fmt(j.stiffness)}")
        if j.effort is not None:
            parts.append(f"effort={_fmt(j.effort)}")
        if j.grip is not None:
            parts.append(f"grip={_fmt_list(j.grip)}")
        lines.append(" ".join(parts))
        for g in link.geoms:
            lines.append(_fmt_geom(link.name, g))
    for g in model.static_geoms:
        lines.append(_fmt_geom(WORLD, g))
    return "\n".join(lines) + "\n"


_LINK_ATTRS = {
    "parent", "joint", "axis", "pos", "quat", "mass", "com", "inertia",
    "limits", "damping", "couple", "stiffness", "effort", "grip",
}
_GEOM_ATTRS = {"shape", "size", "pos", "quat", "material"}
_MATERIAL_ATTRS = {"stiffness", "damping", "friction"}


class _Line:
    def __init__(self, lineno: int, text: str):
        self.lineno = lineno
        self.tokens = [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", text)]
        self.attrs: dict = {}
        self.flags: dict = {}

    def error(self, msg: str, col: int = 1, cls=ModelSyntaxError):
        return cls(msg, self.lineno, col)

    def split(self, allowed: set, flags: set):
        for tok, col in self.tokens[2:]:
            if "=" in tok:
                key, _, val = tok.partition("=")
                if key not in allowed:
                    raise self.error(f"unknown attribute {key!r}", col)
                if key in self.attrs:
                    raise self.error(f"repeated attribute {key!r}", col)
                if val == "":
                    raise self.error(f"empty value for {key!r}", col)
                self.attrs[key] = (val, col + len(key) + 1)
            elif tok in flags:
                self.flags[tok] = col
            else:
                raise self.error(f"unexpected token {tok!r}", col)

    def name(self, what: str) -> str:
        if len(self.tokens) < 2:
            raise self.error(f"{what} needs a name", len(self.tokens[0][0]) + 1)
        tok, col = self.tokens[1]
        if "=" in tok or not _NAME_RE.match(tok):
            raise self.error(f"invalid {what} name {tok!r}", col)
        return tok

    def floats(self, key: str, count: int | None = None, default=None):
        if key not in self.attrs:
            if default is None:
                raise self.error(f"missing attribute {key!r}", len(self.tokens[0][0]) + 1)
            return default
        val, col = self.attrs[key]
        out = []
        for piece in val.split(","):
            try:
                x = float(piece)
            except ValueError:
                raise self.error(f"bad number {piece!r} in {key}", col) from None
            if not math.isfinite(x):
                raise self.error(f"non-finite number in {key}", col)
            out.append(x)
        if count is not None and len(out) != count:
            raise self.error(f"{key} expects {count} values, got {len(out)}", col)
        return tuple(out)

    def scalar(self, key: str, default=None):
        if key not in self.attrs and default is not None:
            return default
        return self.floats(key, 1, None if default is None else (default,))[0]

    def word(self, key: str, choices=None, default=None):
        if key not in self.attrs:
            if default is None:
                raise self.error(f"missing attribute {key!r}", len(self.tokens[0][0]) + 1)
            return default
        val, col = self.attrs[key]
        if choices is not None and val not in choices:
            raise self.error(f"{key} must be one of {', '.join(choices)}; got {val!r}", col)
        if choices is None and not _NAME_RE.match(val):
            raise self.error(f"invalid name {val!r} for {key}", col)
        return val

    def pose(self) -> Pose:
        t = self.floats("pos", 3, (0.0, 0.0, 0.0))
        qv = self.floats("quat", 4, (1.0, 0.0, 0.0, 0.0))
        if sum(c * c for c in qv) == 0.0:
            raise self.error("zero quaternion", self.attrs["quat"][1])
        return Pose(Quaternion(*qv), t)


def parse_model(text: str, name: str = "") -> ModelDef:
    """Parse model-file text into a validated ModelDef.

    Raises ModelSyntaxError / ModelSemanticError carrying line and column.
    """
    materials, links, static = [], [], []
    link_lines, pending_geoms = [], {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        body = raw.split("#", 1)[0]
        line = _Line(lineno, body)
        if not line.tokens:
            continue
        head, col = line.tokens[0]
        if head == "material":
            nm = line.name("material")
            line.split(_MATERIAL_ATTRS, set())
            try:
                materials.append(
                    Material(nm, line.scalar("stiffness", 1.0e5), line.scalar("damping", 0.0), line.scalar("friction", 0.8))
                )
            except ModelSemanticError as exc:
                raise line.error(exc.message, cls=ModelSemanticError) from None
        elif head == "link":
            links.append(_parse_link(line))
            link_lines.append(line)
        elif head == "geom":
            if len(line.tokens) < 2:
                raise line.error("geom needs a target link or 'world'", len(head) + 1)
            target, tcol = line.tokens[1]
            if not _NAME_RE.match(target):
                raise line.error(f"invalid geom target {target!r}", tcol)
            line.split(_GEOM_ATTRS, set())
            shape = line.word("shape", tuple(SHAPE_SIZES))
            size = line.floats("size", SHAPE_SIZES[shape])
            try:
                g = GeomDef(shape, size, line.pose(), line.word("material"))
            except ModelSemanticError as exc:
                raise line.error(exc.message, line.attrs["size"][1], ModelSemanticError) from None
            if target == WORLD:
                static.append((g, line))
            else:
                pending_geoms.setdefault(target, []).append((g, line))
        else:
            raise line.error(f"unknown directive {head!r}", col)

    names = {l.name for l in links}
    for target, items in pending_geoms.items():
        if target not in names:
            raise items[0][1].error(f"geom attached to unknown link {target!r}", items[0][1].tokens[1][1], ModelSemanticError)
    links = [replace(l, geoms=tuple(g for g, _ in pending_geoms.get(l.name, []))) for l in links]

    probe = ModelDef.__new__(ModelDef)
    object.__setattr__(probe, "links", tuple(links))
    object.__setattr__(probe, "materials", tuple(materials))
    object.__setattr__(probe, "static_geoms", tuple(g for g, _ in static))
    problems = check_model(probe)
    if problems:
        idx, msg = problems[0]
        if idx is not None:
            raise link_lines[idx].error(msg, link_lines[idx].tokens[1][1], ModelSemanticError)
        raise ModelSemanticError(msg, 1, 1)
    return ModelDef(tuple(links), tuple(materials), tuple(g for g, _ in static), name)


def _parse_link(line: _Line) -> LinkDef:
    nm = line.name("link")
    line.split(_LINK_ATTRS, {"actuated"})
    if "parent" not in line.attrs:
        raise line.error("missing attribute 'parent'", len("link") + 1)
    parent = line.word("parent")
    kind = line.word("joint", JOINT_KINDS)
    axis = line.floats("axis", 3, (0.0, 0.0, 1.0))
    limits = line.floats("limits", 2) if "limits" in line.attrs else None
    coupling = None
    if "couple" in line.attrs:
        val, col = line.attrs["couple"]
        group, sep, ratio = val.partition(":")
        if not sep or not _NAME_RE.match(group):
            raise line.error("couple expects <group>:<ratio>", col)
        try:
            r = float(ratio)
        except ValueError:
            raise line.error(f"bad coupling ratio {ratio!r}", col) from None
        if not math.isfinite(r) or r == 0.0:
            raise line.error("coupling ratio must be finite and nonzero", col)
        coupling = (group, r)
    joint = JointDef(
        name=nm,
        kind=kind,
        axis=axis,
        limits=limits,
        damping=line.scalar("damping", 0.0),
        actuated="actuated" in line.flags,
        coupling=coupling,
        stiffness=line.scalar("stiffness") if "stiffness" in line.attrs else None,
        effort=line.scalar("effort") if "effort" in line.attrs else None,
        grip=line.floats("grip", 2) if "grip" in line.attrs else None,
    )
    return LinkDef(
        name=nm,
        parent=parent,
        joint=joint,
        mass=line.scalar("mass"),
        com=line.floats("com", 3, (0.0, 0.0, 0.0)),
        inertia=line.floats("inertia", 6),
        joint_pose=line.pose(),
    )
