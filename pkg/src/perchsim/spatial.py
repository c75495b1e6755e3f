"""Spatial algebra: unit quaternions, rigid transforms, twists, wrenches, inertias.

Conventions
-----------
* Quaternions are Hamilton, stored (w, x, y, z), canonicalized to w >= 0.
* ``Pose(rotation, translation)`` maps child-frame points into the parent:
  ``x_parent = R x_child + p``.
* Twists and wrenches are carried as (angular, linear) / (torque, force) pairs
  referenced to the origin of the frame they are expressed in.
* Spatial 6-vectors and 6x6 matrices use (angular; linear) ordering.
* Everything is SI. Millimetres only appear in reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# Renormalize only when the norm has drifted further than this; keeps
# already-normalized values bit-stable (exact text round-trips).
_RENORM_SLACK = 1e-12


def vec3(x, y=None, z=None) -> np.ndarray:
    """Build a finite float 3-vector from three scalars or one sequence."""
    if y is None and z is None:
        arr = np.array(x, dtype=float).reshape(-1)
    else:
        arr = np.array([x, y, z], dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected 3 components, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite vector component")
    return arr


def cross3(a, b) -> np.ndarray:
    """Cross product of two 3-vectors; much cheaper than np.cross for single vectors."""
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def skew(v) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


@dataclass(frozen=True)
class Quaternion:
    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        comps = (float(self.w), float(self.x), float(self.y), float(self.z))
        if not all(math.isfinite(c) for c in comps):
            raise ValueError("non-finite quaternion component")
        n2 = sum(c * c for c in comps)
        if n2 == 0.0:
            raise ValueError("zero quaternion")
        if abs(n2 - 1.0) > _RENORM_SLACK:
            n = math.sqrt(n2)
            comps = tuple(c / n for c in comps)
        if comps[0] < 0.0:
            comps = tuple(-c for c in comps)
        for name, c in zip("wxyz", comps):
            object.__setattr__(self, name, c + 0.0)

    @classmethod
    def identity(cls) -> Quaternion:
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> Quaternion:
        a = np.asarray(axis, dtype=float)
        a = a / np.linalg.norm(a)
        s = math.sin(0.5 * angle)
        return cls(math.cos(0.5 * angle), a[0] * s, a[1] * s, a[2] * s)

    @classmethod
    def from_rotation_vector(cls, rv) -> Quaternion:
        """Exponential map: rotation by |rv| about rv/|rv|."""
        rv = np.asarray(rv, dtype=float)
        theta = math.sqrt(float(rv @ rv))
        if theta < 1e-8:
            # second-order series; exact to double precision at this size
            half = 0.5 - theta * theta / 48.0
            return cls(1.0 - theta * theta / 8.0, rv[0] * half, rv[1] * half, rv[2] * half)
        s = math.sin(0.5 * theta) / theta
        return cls(math.cos(0.5 * theta), rv[0] * s, rv[1] * s, rv[2] * s)

    @classmethod
    def from_matrix(cls, R) -> Quaternion:
        R = np.asarray(R, dtype=float)
        tr = R[0, 0] + R[1, 1] + R[2, 2]
        if tr > 0.0:
            s = 2.0 * math.sqrt(tr + 1.0)
            return cls(0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s)
        i = int(np.argmax([R[0, 0], R[1, 1], R[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = 2.0 * math.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k])
        v = [0.0, 0.0, 0.0]
        v[i] = 0.25 * s
        v[j] = (R[j, i] + R[i, j]) / s
        v[k] = (R[k, i] + R[i, k]) / s
        return cls((R[k, j] - R[j, k]) / s, *v)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def __mul__(self, other: Quaternion) -> Quaternion:
        aw, ax, ay, az = self.w, self.x, self.y, self.z
        bw, bx, by, bz = other.w, other.x, other.y, other.z
        return Quaternion(
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        )

    def conjugate(self) -> Quaternion:
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def to_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.w, self.x, self.y, self.z)

    def rotate(self, v) -> np.ndarray:
        return self.to_matrix() @ np.asarray(v, dtype=float)

    def angle_to(self, other: Quaternion) -> float:
        d = abs(self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z)
        return 2.0 * math.acos(min(1.0, d))


def quat_to_matrix(w: float, x: float, y: float, z: float) -> np.ndarray:
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def integrate_orientation(qt: Quaternion, omega, dt: float) -> Quaternion:
    """Advance ``qt`` by a world-frame angular velocity held for ``dt``.

    Uses the exact exponential map, so a constant ``omega`` is integrated
    without truncation error.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    omega = np.asarray(omega, dtype=float)
    if not omega.any():
        return qt
    return Quaternion.from_rotation_vector(omega * dt) * qt


@dataclass(frozen=True)
class Pose:
    rotation: Quaternion = field(default_factory=Quaternion.identity)
    translation: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        t = tuple(float(c) + 0.0 for c in self.translation)
        if len(t) != 3 or not all(math.isfinite(c) for c in t):
            raise ValueError(f"bad translation {self.translation!r}")
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_rt(cls, R, p) -> Pose:
        return cls(Quaternion.from_matrix(R), tuple(np.asarray(p, dtype=float)))

    # cached read-only arrays; poses are immutable
    @cached_property
    def t(self) -> np.ndarray:
        out = np.array(self.translation)
        out.flags.writeable = False
        return out

    @cached_property
    def R(self) -> np.ndarray:
        out = self.rotation.to_matrix()
        out.flags.writeable = False
        return out

    def transform_point(self, x) -> np.ndarray:
        return self.R @ np.asarray(x, dtype=float) + self.t

    def inverse(self) -> Pose:
        qi = self.rotation.conjugate()
        return Pose(qi, tuple(-(qi.to_matrix() @ self.t)))

    def __matmul__(self, other: Pose) -> Pose:
        return compose(self, other)

    def allclose(self, other: Pose, atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.t, other.t, rtol=0.0, atol=atol)
            and np.allclose(self.R, other.R, rtol=0.0, atol=atol)
        )


def compose(a: Pose, b: Pose) -> Pose:
    """Chain two poses: the result applies ``b`` first, then ``a``."""
    return Pose(a.rotation * b.rotation, tuple(a.R @ b.t + a.t))


def invert(p: Pose) -> Pose:
    return p.inverse()


@dataclass(frozen=True, eq=False)
class Twist:
    angular: np.ndarray
    linear: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "angular", vec3(self.angular))
        object.__setattr__(self, "linear", vec3(self.linear))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.angular, self.linear])

    def transform(self, X: Pose) -> Twist:
        """Re-express a twist given in frame B (pose X of B in A) in frame A."""
        R, p = X.R, X.t
        w = R @ self.angular
        return Twist(w, R @ self.linear + np.cross(p, w))

    def point_velocity(self, x) -> np.ndarray:
        return self.linear + np.cross(self.angular, np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class Wrench:
    torque: np.ndarray
    force: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "torque", vec3(self.torque))
        object.__setattr__(self, "force", vec3(self.force))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.torque, self.force])

    def transform(self, X: Pose) -> Wrench:
        R, p = X.R, X.t
        f = R @ self.force
        return Wrench(R @ self.torque + np.cross(p, f), f)

    def power(self, twist: Twist) -> float:
        return float(self.torque @ twist.angular + self.force @ twist.linear)


@dataclass(frozen=True, eq=False)
class SpatialInertia:
    """Rigid-body inertia: mass, COM in the body frame, rotational inertia about the COM."""

    mass: float
    com: np.ndarray
    rot_inertia: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.mass) and self.mass > 0.0):
            raise ValueError(f"mass must be positive, got {self.mass}")
        object.__setattr__(self, "com", vec3(self.com))
        I = np.array(self.rot_inertia, dtype=float)
        if I.shape != (3, 3) or not np.all(np.isfinite(I)):
            raise ValueError("rotational inertia must be a finite 3x3 matrix")
        if np.max(np.abs(I - I.T)) > 1e-12 * max(1.0, np.max(np.abs(I))):
            raise ValueError("rotational inertia must be symmetric")
        I = 0.5 * (I + I.T)
        if np.linalg.eigvalsh(I)[0] <= 0.0:
            raise ValueError("rotational inertia must be positive definite")
        object.__setattr__(self, "rot_inertia", I)

    def inertia_about_origin(self) -> np.ndarray:
        c = self.com
        return self.rot_inertia + self.mass * (float(c @ c) * np.eye(3) - np.outer(c, c))

    def to_matrix(self) -> np.ndarray:
        """6x6 spatial inertia at the frame origin, (angular; linear) ordering."""
        return spatial_inertia_matrix(self.mass, self.com, self.rot_inertia)

    def kinetic_energy(self, twist: Twist) -> float:
        v = twist.as_array()
        return 0.5 * float(v @ self.to_matrix() @ v)


def spatial_inertia_matrix(mass: float, com, rot_inertia) -> np.ndarray:
    C = skew(com)
    out = np.empty((6, 6))
    out[:3, :3] = rot_inertia + mass * (C @ C.T)
    out[:3, 3:] = mass * C
    out[3:, :3] = mass * C.T
    out[3:, 3:] = mass * np.eye(3)
    return out


def transform_inertia(inertia: SpatialInertia, X: Pose) -> SpatialInertia:
    """Express a body-frame inertia in the frame where the body sits at pose ``X``."""
    R = X.R
    return SpatialInertia(inertia.mass, X.transform_point(inertia.com), R @ inertia.rot_inertia @ R.T)
