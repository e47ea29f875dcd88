"""Pose algebra for the handover frame chain.

Frames in play: robot base (B), external camera (C), tracked hand (H) and
grasp/object (G).  A hand detection arrives either as a pose in the camera
frame or as a pixel + depth measurement that is back-projected through the
pinhole model; the calibration T_B_C lifts it into the base frame and a
per-task grasp offset T_H_G turns it into the commanded object target:

    T_B_H = T_B_C * T_C_H
    T_B_G = T_B_H * T_H_G

Rotations are unit quaternions (w, x, y, z), renormalized on drift and kept
in canonical form (w >= 0) so equal rotations compare equal componentwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "UNIT_TOL",
    "GEOM_TOL",
    "FrameTag",
    "FrameMismatchError",
    "Vec3",
    "UnitQuaternion",
    "Pose",
    "CameraIntrinsics",
    "compose",
    "invert",
    "hand_in_base",
    "grasp_target",
    "back_project",
    "slerp",
]

# Unit-norm / orthonormality tolerance.
UNIT_TOL = 1e-9
# Tolerance for geometric round trips (projection, matrix conversions).
GEOM_TOL = 1e-6


class FrameTag(Enum):
    BASE = "base"
    CAMERA = "camera"
    HAND = "hand"
    GRASP = "grasp"
    OBJECT = "object"


class FrameMismatchError(ValueError):
    """Composed poses carry frame tags that do not chain."""


def _require_finite(**fields: float) -> None:
    for name, value in fields.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class Vec3:
    """Finite 3-vector in meters (or unitless for directions)."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        _require_finite(x=self.x, y=self.y, z=self.z)

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n < 1e-12:
            raise ValueError("cannot normalize a zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_array(cls, a) -> "Vec3":
        a = np.asarray(a, dtype=float).reshape(3)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @classmethod
    def zero(cls) -> "Vec3":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class UnitQuaternion:
    """Rotation as a unit quaternion, canonicalized to w >= 0 at construction.

    Inputs are renormalized when the squared norm drifts by more than 1e-12,
    so long composition chains stay unit without perturbing already-clean
    values bit-for-bit.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        _require_finite(w=self.w, x=self.x, y=self.y, z=self.z)
        n2 = self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
        if n2 < 1e-24:
            raise ValueError("zero-norm quaternion")
        if abs(n2 - 1.0) > 1e-12:
            n = math.sqrt(n2)
            object.__setattr__(self, "w", self.w / n)
            object.__setattr__(self, "x", self.x / n)
            object.__setattr__(self, "y", self.y / n)
            object.__setattr__(self, "z", self.z / n)
        if self._needs_sign_flip():
            object.__setattr__(self, "w", -self.w)
            object.__setattr__(self, "x", -self.x)
            object.__setattr__(self, "y", -self.y)
            object.__setattr__(self, "z", -self.z)

    def _needs_sign_flip(self) -> bool:
        # Canonical sign: w > 0; on w == 0 the first nonzero of (x, y, z) is positive.
        if self.w != 0.0:
            return self.w < 0.0
        for c in (self.x, self.y, self.z):
            if c != 0.0:
                return c < 0.0
        return False

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis: Vec3, angle: float) -> "UnitQuaternion":
        u = axis.normalized()
        half = 0.5 * angle
        s = math.sin(half)
        return cls(math.cos(half), u.x * s, u.y * s, u.z * s)

    @classmethod
    def from_matrix(cls, m) -> "UnitQuaternion":
        """Convert an orthonormal right-handed 3x3 matrix (Shepperd's method)."""
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"expected 3x3 matrix, got {m.shape}")
        if np.max(np.abs(m @ m.T - np.eye(3))) > 1e-7:
            raise ValueError("rotation matrix is not orthonormal")
        if np.linalg.det(m) < 0.0:
            raise ValueError("rotation matrix is not right-handed")
        t = m[0, 0] + m[1, 1] + m[2, 2]
        if t > 0.0:
            r = math.sqrt(1.0 + t)
            s = 0.5 / r
            return cls(0.5 * r, (m[2, 1] - m[1, 2]) * s, (m[0, 2] - m[2, 0]) * s, (m[1, 0] - m[0, 1]) * s)
        i = int(np.argmax([m[0, 0], m[1, 1], m[2, 2]]))
        if i == 0:
            r = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
            s = 0.5 / r
            return cls((m[2, 1] - m[1, 2]) * s, 0.5 * r, (m[0, 1] + m[1, 0]) * s, (m[0, 2] + m[2, 0]) * s)
        if i == 1:
            r = math.sqrt(1.0 - m[0, 0] + m[1, 1] - m[2, 2])
            s = 0.5 / r
            return cls((m[0, 2] - m[2, 0]) * s, (m[0, 1] + m[1, 0]) * s, 0.5 * r, (m[1, 2] + m[2, 1]) * s)
        r = math.sqrt(1.0 - m[0, 0] - m[1, 1] + m[2, 2])
        s = 0.5 / r
        return cls((m[1, 0] - m[0, 1]) * s, (m[0, 2] + m[2, 0]) * s, (m[1, 2] + m[2, 1]) * s, 0.5 * r)

    def multiply(self, other: "UnitQuaternion") -> "UnitQuaternion":
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return UnitQuaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    __mul__ = multiply

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def rotate(self, v: Vec3) -> Vec3:
        # v' = v + w*t + u x t with t = 2 (u x v); exact pass-through for v = 0.
        tx = 2.0 * (self.y * v.z - self.z * v.y)
        ty = 2.0 * (self.z * v.x - self.x * v.z)
        tz = 2.0 * (self.x * v.y - self.y * v.x)
        return Vec3(
            v.x + self.w * tx + self.y * tz - self.z * ty,
            v.y + self.w * ty + self.z * tx - self.x * tz,
            v.z + self.w * tz + self.x * ty - self.y * tx,
        )

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ]
        )

    def dot(self, other: "UnitQuaternion") -> float:
        return self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def angle(self) -> float:
        """Rotation angle in [0, pi]."""
        vn = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        return 2.0 * math.atan2(vn, abs(self.w))

    def angle_to(self, other: "UnitQuaternion") -> float:
        return self.conjugate().multiply(other).angle()

    def as_rotvec(self) -> np.ndarray:
        vn = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if vn < 1e-12:
            return 2.0 * np.array([self.x, self.y, self.z])
        return (2.0 * math.atan2(vn, self.w) / vn) * np.array([self.x, self.y, self.z])

    def as_wxyz(self) -> Tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)


@dataclass(frozen=True)
class Pose:
    """Rigid transform `parent_T_child`, optionally tagged with its frame pair.

    Tags are zero-cost labels: composition only complains when both operands
    carry tags and the inner frames disagree.
    """

    rotation: UnitQuaternion
    translation: Vec3
    frames: Optional[Tuple[FrameTag, FrameTag]] = None

    @classmethod
    def identity(cls, frames: Optional[Tuple[FrameTag, FrameTag]] = None) -> "Pose":
        return cls(UnitQuaternion.identity(), Vec3.zero(), frames)

    def compose(self, other: "Pose") -> "Pose":
        frames = None
        if self.frames is not None and other.frames is not None:
            if self.frames[1] != other.frames[0]:
                raise FrameMismatchError(
                    f"cannot chain {self.frames[0].value}->{self.frames[1].value} "
                    f"with {other.frames[0].value}->{other.frames[1].value}"
                )
            frames = (self.frames[0], other.frames[1])
        return Pose(
            self.rotation.multiply(other.rotation),
            self.translation + self.rotation.rotate(other.translation),
            frames,
        )

    def invert(self) -> "Pose":
        inv_rot = self.rotation.conjugate()
        frames = (self.frames[1], self.frames[0]) if self.frames is not None else None
        return Pose(inv_rot, -inv_rot.rotate(self.translation), frames)

    def apply(self, point: Vec3) -> Vec3:
        return self.translation + self.rotation.rotate(point)

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.to_matrix()
        m[:3, 3] = self.translation.as_array()
        return m

    @classmethod
    def from_matrix(cls, m, frames: Optional[Tuple[FrameTag, FrameTag]] = None) -> "Pose":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"expected 4x4 matrix, got {m.shape}")
        if np.max(np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > 1e-9:
            raise ValueError("last row of a homogeneous transform must be [0 0 0 1]")
        return cls(UnitQuaternion.from_matrix(m[:3, :3]), Vec3.from_array(m[:3, 3]), frames)


def compose(a: Pose, b: Pose) -> Pose:
    return a.compose(b)


def invert(p: Pose) -> Pose:
    return p.invert()


def _check_tag(pose: Pose, expected: Tuple[FrameTag, FrameTag], which: str) -> None:
    if pose.frames is not None and pose.frames != expected:
        raise FrameMismatchError(
            f"{which} must be tagged {expected[0].value}->{expected[1].value}, "
            f"got {pose.frames[0].value}->{pose.frames[1].value}"
        )


def hand_in_base(calib: Pose, hand_in_cam: Pose) -> Pose:
    """Lift a camera-frame hand pose into the base frame: T_B_H = T_B_C * T_C_H."""
    _check_tag(calib, (FrameTag.BASE, FrameTag.CAMERA), "calibration")
    _check_tag(hand_in_cam, (FrameTag.CAMERA, FrameTag.HAND), "hand pose")
    out = Pose(calib.rotation, calib.translation).compose(
        Pose(hand_in_cam.rotation, hand_in_cam.translation)
    )
    return Pose(out.rotation, out.translation, (FrameTag.BASE, FrameTag.HAND))


def grasp_target(hand_pose: Pose, grasp_offset: Pose) -> Pose:
    """Commanded object target: T_B_G = T_B_H * T_H_G.

    The grasp frame coincides with the object frame at the handover, so the
    result doubles as the target object pose.
    """
    _check_tag(hand_pose, (FrameTag.BASE, FrameTag.HAND), "hand pose")
    _check_tag(grasp_offset, (FrameTag.HAND, FrameTag.GRASP), "grasp offset")
    out = Pose(hand_pose.rotation, hand_pose.translation).compose(
        Pose(grasp_offset.rotation, grasp_offset.translation)
    )
    return Pose(out.rotation, out.translation, (FrameTag.BASE, FrameTag.GRASP))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self) -> None:
        _require_finite(fx=self.fx, fy=self.fy, cx=self.cx, cy=self.cy)
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths must be positive")


def back_project(u: float, v: float, depth: float, k: CameraIntrinsics) -> Vec3:
    """Pixel + depth to a camera-frame point: z = depth along the optical axis."""
    _require_finite(u=u, v=v, depth=depth)
    if depth <= 0.0:
        raise ValueError(f"depth must be positive, got {depth!r}")
    return Vec3((u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth)


def slerp(qa: UnitQuaternion, qb: UnitQuaternion, u: float) -> UnitQuaternion:
    """Shortest-arc spherical interpolation; u in [0, 1].

    Near-parallel pairs (dot > 1 - 1e-6) fall back to normalized lerp.  When
    the pair is an exact quarter-turn tie in quaternion space (dot == 0, both
    arcs equally short) the arc through the dominant component of qa^-1 qb is
    chosen; the tie-break is arbitrary but deterministic.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"interpolation parameter out of range: {u!r}")
    if u == 0.0:
        return qa
    if u == 1.0:
        return qb
    d = qa.dot(qb)
    bw, bx, by, bz = qb.w, qb.x, qb.y, qb.z
    if abs(d) < 1e-12:
        rel = qa.conjugate().multiply(qb)
        comps = (rel.w, rel.x, rel.y, rel.z)
        k = max(range(4), key=lambda i: abs(comps[i]))
        if comps[k] < 0.0:
            bw, bx, by, bz = -bw, -bx, -by, -bz
            d = -d
    elif d < 0.0:
        bw, bx, by, bz = -bw, -bx, -by, -bz
        d = -d
    if d > 1.0 - 1e-6:
        return UnitQuaternion(
            qa.w + u * (bw - qa.w),
            qa.x + u * (bx - qa.x),
            qa.y + u * (by - qa.y),
            qa.z + u * (bz - qa.z),
        )
    theta = math.acos(min(1.0, max(-1.0, d)))
    st = math.sin(theta)
    ca = math.sin((1.0 - u) * theta) / st
    cb = math.sin(u * theta) / st
    return UnitQuaternion(
        ca * qa.w + cb * bw,
        ca * qa.x + cb * bx,
        ca * qa.y + cb * by,
        ca * qa.z + cb * bz,
    )
