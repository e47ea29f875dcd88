"""Approach trajectories for object handover.

The position path is a cubic Bezier whose inner control points encode the
departure and arrival directions:

    p1 = p0 + alpha_s * d_s        (leave the start along d_s)
    p2 = p3 - alpha_a * d_a        (arrive at the target travelling along d_a)

Time is warped by a rest-to-rest quintic s(t) = 10 tau^3 - 15 tau^4 + 6 tau^5
(tau = t/T) whose jerk peaks at 60/T^3 at both ends, and orientation follows a
shortest-arc slerp that locks onto the target rotation at a configurable
fraction of the path so the object's final orientation is settled well before
arrival.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

from .se3 import Pose, UnitQuaternion, Vec3, slerp

__all__ = [
    "BezierPath",
    "ApproachSpec",
    "MotionLaw",
    "OrientationPlan",
    "PoseTrajectory",
    "build_control_points",
    "eval_position",
    "eval_path_derivatives",
    "quintic_s",
    "eval_orientation",
    "eval_pose",
    "max_cartesian_jerk",
    "cartesian_jerk",
    "cartesian_speed",
    "resolve_start_direction",
    "duration_for",
]

_DIR_TOL = 1e-9
_DEGENERATE_EPS = 1e-12
# Fall back to the chord when d_s points within 5 degrees of anti-parallel to it.
_CUSP_COS = math.cos(math.radians(175.0))


@dataclass(frozen=True)
class BezierPath:
    """Cubic Bezier in R^3.  p0 != p3 unless the degenerate flag is set."""

    p0: Vec3
    p1: Vec3
    p2: Vec3
    p3: Vec3
    degenerate: bool = False

    def __post_init__(self) -> None:
        if not self.degenerate and (self.p3 - self.p0).norm() < _DEGENERATE_EPS:
            raise ValueError("start and target coincide; use degenerate=True for a zero-length path")

    @classmethod
    def point(cls, p: Vec3) -> "BezierPath":
        return cls(p, p, p, p, degenerate=True)

    def chord(self) -> float:
        return (self.p3 - self.p0).norm()


@dataclass(frozen=True)
class ApproachSpec:
    """Unit departure/arrival directions and their control-point distances (m)."""

    d_s: Vec3
    d_a: Vec3
    alpha_s: float
    alpha_a: float

    def __post_init__(self) -> None:
        for name, d in (("d_s", self.d_s), ("d_a", self.d_a)):
            if abs(d.norm() - 1.0) > _DIR_TOL:
                raise ValueError(f"{name} must be a unit vector, |{name}| = {d.norm()!r}")
        if not (self.alpha_s > 0.0 and self.alpha_a > 0.0):
            raise ValueError("alpha_s and alpha_a must be positive")


@dataclass(frozen=True)
class MotionLaw:
    """Rest-to-rest quintic time scaling over a fixed duration T (seconds)."""

    duration: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.duration) and self.duration > 0.0):
            raise ValueError(f"duration must be positive, got {self.duration!r}")

    @property
    def max_jerk(self) -> float:
        """Peak |s'''| of the time law itself: 60 / T^3, attained at t in {0, T}."""
        return 60.0 / self.duration**3


@dataclass(frozen=True)
class OrientationPlan:
    """Slerp from q_start to q_target, locked on target for s >= lock_factor."""

    q_start: UnitQuaternion
    q_target: UnitQuaternion
    lock_factor: float = 0.7

    def __post_init__(self) -> None:
        if not (0.0 < self.lock_factor <= 1.0):
            raise ValueError(f"lock_factor must be in (0, 1], got {self.lock_factor!r}")


@dataclass(frozen=True)
class PoseTrajectory:
    path: BezierPath
    law: MotionLaw
    orientation: OrientationPlan


def build_control_points(start: Vec3, target: Vec3, spec: ApproachSpec) -> BezierPath:
    """Place the inner control points from the departure/arrival directions."""
    p1 = start + spec.alpha_s * spec.d_s
    p2 = target - spec.alpha_a * spec.d_a
    return BezierPath(start, p1, p2, target)


def _check_s(s: float) -> None:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"path parameter out of range: {s!r}")


def eval_position(path: BezierPath, s: float) -> Vec3:
    _check_s(s)
    if path.degenerate:
        return path.p0
    r = 1.0 - s
    b0 = r * r * r
    b1 = 3.0 * r * r * s
    b2 = 3.0 * r * s * s
    b3 = s * s * s
    return Vec3(
        b0 * path.p0.x + b1 * path.p1.x + b2 * path.p2.x + b3 * path.p3.x,
        b0 * path.p0.y + b1 * path.p1.y + b2 * path.p2.y + b3 * path.p3.y,
        b0 * path.p0.z + b1 * path.p1.z + b2 * path.p2.z + b3 * path.p3.z,
    )


def eval_path_derivatives(path: BezierPath, s: float) -> Tuple[Vec3, Vec3, Vec3]:
    """First three derivatives with respect to s.  d3 is constant."""
    _check_s(s)
    if path.degenerate:
        zero = Vec3.zero()
        return zero, zero, zero
    r = 1.0 - s
    d1 = 3.0 * (
        r * r * (path.p1 - path.p0)
        + 2.0 * r * s * (path.p2 - path.p1)
        + s * s * (path.p3 - path.p2)
    )
    d2 = 6.0 * (
        r * (path.p2 - 2.0 * path.p1 + path.p0)
        + s * (path.p3 - 2.0 * path.p2 + path.p1)
    )
    d3 = 6.0 * (path.p3 - 3.0 * path.p2 + 3.0 * path.p1 - path.p0)
    return d1, d2, d3


def quintic_s(t: float, duration: float) -> Tuple[float, float, float, float]:
    """(s, s', s'', s''') of the rest-to-rest quintic at time t in [0, T]."""
    if duration <= 0.0:
        raise ValueError(f"duration must be positive, got {duration!r}")
    if not 0.0 <= t <= duration:
        raise ValueError(f"time out of range: {t!r} not in [0, {duration}]")
    tau = t / duration
    t2 = tau * tau
    t3 = t2 * tau
    s = t3 * (10.0 - 15.0 * tau + 6.0 * t2)
    ds = (30.0 * t2 - 60.0 * t3 + 30.0 * t2 * t2) / duration
    d2s = (60.0 * tau - 180.0 * t2 + 120.0 * t3) / duration**2
    d3s = (60.0 - 360.0 * tau + 360.0 * t2) / duration**3
    return s, ds, d2s, d3s


def eval_orientation(plan: OrientationPlan, s: float) -> UnitQuaternion:
    """Locked slerp: q(s) = slerp(q_start, q_target, min(s / lock_factor, 1)).

    Returns q_target itself (bit-exact) for every s >= lock_factor.
    """
    _check_s(s)
    u = s / plan.lock_factor
    if u >= 1.0:
        return plan.q_target
    return slerp(plan.q_start, plan.q_target, u)


def eval_pose(traj: PoseTrajectory, t: float) -> Pose:
    s, _, _, _ = quintic_s(t, traj.law.duration)
    return Pose(eval_orientation(traj.orientation, s), eval_position(traj.path, s))


def _jerk_vector(traj: PoseTrajectory, t: float) -> Vec3:
    s, ds, d2s, d3s = quintic_s(t, traj.law.duration)
    d1, d2, d3 = eval_path_derivatives(traj.path, s)
    return d1 * d3s + (3.0 * ds * d2s) * d2 + (ds * ds * ds) * d3


def cartesian_jerk(traj: PoseTrajectory, t: float) -> float:
    """|p'''(t)| via the chain rule: d1 s''' + 3 d2 s' s'' + d3 s'^3."""
    return _jerk_vector(traj, t).norm()


def cartesian_speed(traj: PoseTrajectory, t: float) -> float:
    s, ds, _, _ = quintic_s(t, traj.law.duration)
    d1, _, _ = eval_path_derivatives(traj.path, s)
    return (d1 * ds).norm()


def max_cartesian_jerk(traj: PoseTrajectory, n_samples: int = 200) -> float:
    """Max |p'''| over a uniform time grid (endpoints included)."""
    if n_samples < 100:
        raise ValueError(f"n_samples must be >= 100, got {n_samples}")
    T = traj.law.duration
    step = T / (n_samples - 1)
    best = 0.0
    for i in range(n_samples):
        t = T if i == n_samples - 1 else i * step
        j = cartesian_jerk(traj, t)
        if j > best:
            best = j
    return best


def resolve_start_direction(x_axis: Vec3, start: Vec3, target: Vec3) -> Vec3:
    """Departure direction: the object X axis, or the chord when the target
    sits within 5 degrees of anti-parallel to it (cusp risk)."""
    d = x_axis.normalized()
    chord = target - start
    n = chord.norm()
    if n < _DEGENERATE_EPS:
        return d
    u = chord * (1.0 / n)
    if d.dot(u) < _CUSP_COS:
        return u
    return d


def duration_for(distance: float, avg_speed: float, min_duration: float) -> float:
    """T = max(min_duration, distance / avg_speed)."""
    if avg_speed <= 0.0 or min_duration <= 0.0:
        raise ValueError("avg_speed and min_duration must be positive")
    return max(min_duration, distance / avg_speed)
