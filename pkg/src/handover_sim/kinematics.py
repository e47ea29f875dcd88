"""Serial-chain kinematics: modified-DH forward kinematics, geometric
Jacobian, manipulability, damped-least-squares IK, and trajectory-level
feasibility validation.

Joint i is described by (a, d, alpha, theta_offset) in the modified (Craig)
convention; the transform contributed by joint i is

    Rx(alpha) Tx(a) Rz(q + theta_offset) Tz(d)

and a fixed flange offset closes the chain.  All chains here are revolute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .se3 import Pose, UnitQuaternion, Vec3
from .trajectory import PoseTrajectory, eval_orientation, eval_position

__all__ = [
    "JointParams",
    "ChainModel",
    "ValidationThresholds",
    "SamplePoint",
    "FeasibilityReport",
    "KinematicsError",
    "NoConvergenceError",
    "JointLimitError",
    "forward_kinematics",
    "jacobian",
    "manipulability",
    "singular_values",
    "solve_ik",
    "validate_trajectory",
    "planar_chain",
]


class KinematicsError(RuntimeError):
    pass


class NoConvergenceError(KinematicsError):
    """IK did not reach the pose tolerances within the iteration budget."""


class JointLimitError(KinematicsError):
    """IK converged to a configuration outside the limits minus the margin."""


@dataclass(frozen=True)
class JointParams:
    """Modified-DH parameters and limits for one revolute joint."""

    a: float
    d: float
    alpha: float
    theta_offset: float = 0.0
    q_min: float = -math.pi
    q_max: float = math.pi
    velocity_limit: float = math.inf

    def __post_init__(self) -> None:
        if self.q_min >= self.q_max:
            raise ValueError(f"empty joint range [{self.q_min}, {self.q_max}]")


@dataclass(frozen=True)
class ChainModel:
    joints: Tuple[JointParams, ...]
    flange_offset: Pose = field(default_factory=Pose.identity)
    name: str = "chain"
    home: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if not self.joints:
            raise ValueError("chain needs at least one joint")
        if self.home is not None and len(self.home) != len(self.joints):
            raise ValueError("home configuration length does not match joint count")

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @cached_property
    def _flange_matrix(self) -> np.ndarray:
        return self.flange_offset.to_matrix()

    @cached_property
    def reach_bound(self) -> float:
        """Upper bound on the distance from base to flange (triangle inequality)."""
        r = sum(abs(j.a) + abs(j.d) for j in self.joints)
        return r + self.flange_offset.translation.norm()

    @cached_property
    def limits(self) -> Tuple[np.ndarray, np.ndarray]:
        lo = np.array([j.q_min for j in self.joints])
        hi = np.array([j.q_max for j in self.joints])
        return lo, hi

    def neutral(self) -> np.ndarray:
        if self.home is not None:
            return np.array(self.home, dtype=float)
        lo, hi = self.limits
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ValidationThresholds:
    manipulability_min: float = 0.01
    sigma_min: float = 0.01
    joint_margin: float = 0.05
    ik_tol_pos: float = 1e-3
    ik_tol_rot: float = 0.01
    ik_max_iters: int = 200
    ik_damping: float = 1e-3

    def __post_init__(self) -> None:
        for name in ("manipulability_min", "sigma_min", "ik_tol_pos", "ik_tol_rot", "ik_damping"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.joint_margin < 0.0:
            raise ValueError("joint_margin must be non-negative")
        if self.ik_max_iters < 1:
            raise ValueError("ik_max_iters must be >= 1")


@dataclass(frozen=True)
class SamplePoint:
    s: float
    ik_converged: bool
    manipulability: float
    sigma_min: float
    joint_limit_ok: bool
    q: Tuple[float, ...]


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    samples: Tuple[SamplePoint, ...]
    first_failure: Optional[Tuple[float, str]] = None


def _as_config(model: ChainModel, q) -> np.ndarray:
    arr = np.asarray(q, dtype=float).reshape(-1)
    if arr.shape[0] != model.n_joints:
        raise ValueError(f"expected {model.n_joints} joint values, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("joint configuration must be finite")
    return arr


def _joint_matrix(p: JointParams, q: float) -> np.ndarray:
    th = q + p.theta_offset
    ct, st = math.cos(th), math.sin(th)
    ca, sa = math.cos(p.alpha), math.sin(p.alpha)
    return np.array(
        [
            [ct, -st, 0.0, p.a],
            [st * ca, ct * ca, -sa, -p.d * sa],
            [st * sa, ct * sa, ca, p.d * ca],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def _cumulative(model: ChainModel, q: np.ndarray) -> List[np.ndarray]:
    mats = []
    acc = np.eye(4)
    for p, qi in zip(model.joints, q):
        acc = acc @ _joint_matrix(p, float(qi))
        mats.append(acc)
    return mats


def forward_kinematics(model: ChainModel, q) -> Pose:
    """Flange pose in the base frame."""
    q = _as_config(model, q)
    flange = _cumulative(model, q)[-1] @ model._flange_matrix
    return Pose.from_matrix(flange)


def _jacobian_from(mats: List[np.ndarray], flange: np.ndarray) -> np.ndarray:
    p_e = flange[:3, 3]
    n = len(mats)
    J = np.zeros((6, n))
    for i, A in enumerate(mats):
        z = A[:3, 2]
        J[:3, i] = np.cross(z, p_e - A[:3, 3])
        J[3:, i] = z
    return J


def jacobian(model: ChainModel, q) -> np.ndarray:
    """Geometric Jacobian (6 x n) at the flange, base-frame coordinates."""
    q = _as_config(model, q)
    mats = _cumulative(model, q)
    return _jacobian_from(mats, mats[-1] @ model._flange_matrix)


def manipulability(model: ChainModel, q, task_rows: Optional[Sequence[int]] = None) -> float:
    """Yoshikawa measure sqrt(det(J J^T)); task_rows selects a reduced
    task-space block (e.g. (0, 1) for a planar chain's x-y velocity)."""
    J = jacobian(model, q)
    if task_rows is not None:
        J = J[list(task_rows), :]
    g = float(np.linalg.det(J @ J.T))
    return math.sqrt(g) if g > 0.0 else 0.0


def singular_values(model: ChainModel, q, task_rows: Optional[Sequence[int]] = None) -> np.ndarray:
    """Jacobian singular values, descending."""
    J = jacobian(model, q)
    if task_rows is not None:
        J = J[list(task_rows), :]
    return np.linalg.svd(J, compute_uv=False)


def _rotvec_of(m: np.ndarray) -> np.ndarray:
    return UnitQuaternion.from_matrix(m).as_rotvec()


def _dls_iterate(
    model: ChainModel, target: Pose, seed: np.ndarray, thr: ValidationThresholds
) -> Tuple[np.ndarray, bool]:
    q = seed.copy()
    tm = target.to_matrix()
    pt, Rt = tm[:3, 3], tm[:3, :3]
    mu2 = thr.ik_damping**2
    eye6 = np.eye(6)
    for it in range(thr.ik_max_iters + 1):
        mats = _cumulative(model, q)
        Te = mats[-1] @ model._flange_matrix
        ep = pt - Te[:3, 3]
        er = _rotvec_of(Rt @ Te[:3, :3].T)
        if np.linalg.norm(ep) < thr.ik_tol_pos and np.linalg.norm(er) < thr.ik_tol_rot:
            return q, True
        if it == thr.ik_max_iters:
            break
        J = _jacobian_from(mats, Te)
        e = np.concatenate([ep, er])
        q = q + J.T @ np.linalg.solve(J @ J.T + mu2 * eye6, e)
    return q, False


def _within_limits(model: ChainModel, q: np.ndarray, margin: float) -> bool:
    lo, hi = model.limits
    return bool(np.all(q >= lo + margin) and np.all(q <= hi - margin))


def _guarded_ik(
    model: ChainModel, target: Pose, seed: np.ndarray, thr: ValidationThresholds
) -> Tuple[np.ndarray, bool]:
    # Targets provably outside the reach sphere cannot converge; skip the budget.
    if target.translation.norm() > model.reach_bound:
        return seed.copy(), False
    return _dls_iterate(model, target, seed, thr)


def solve_ik(model: ChainModel, target: Pose, seed, thresholds: ValidationThresholds) -> np.ndarray:
    """Damped-least-squares IK: dq = J^T (J J^T + mu^2 I)^-1 e.

    The error stacks the position difference with the rotation vector of
    R_target R_current^T.  A seed equal to an exact solution is returned
    unchanged (the tolerance check runs before the first update).
    """
    seed = _as_config(model, seed)
    q, converged = _guarded_ik(model, target, seed, thresholds)
    if not converged:
        raise NoConvergenceError(
            f"IK did not converge within {thresholds.ik_max_iters} iterations"
        )
    if not _within_limits(model, q, thresholds.joint_margin):
        raise JointLimitError("converged configuration violates joint limits minus margin")
    return q


def validate_trajectory(
    model: ChainModel,
    traj: PoseTrajectory,
    thresholds: ValidationThresholds,
    n_samples: int = 50,
    seed=None,
) -> FeasibilityReport:
    """Sample the trajectory uniformly in s and check every sample for IK
    convergence, manipulability, minimum singular value, and joint limits.

    IK is warm-started from the previous converged sample; the first seed
    defaults to the model's home (or mid-range) configuration.
    """
    if n_samples < 10:
        raise ValueError(f"n_samples must be >= 10, got {n_samples}")
    q_prev = model.neutral() if seed is None else _as_config(model, seed)
    records: List[SamplePoint] = []
    first_failure: Optional[Tuple[float, str]] = None
    for i in range(n_samples):
        s = i / (n_samples - 1)
        pose = Pose(eval_orientation(traj.orientation, s), eval_position(traj.path, s))
        q, converged = _guarded_ik(model, pose, q_prev, thresholds)
        w = manipulability(model, q)
        sv = singular_values(model, q)
        limit_ok = _within_limits(model, q, thresholds.joint_margin)
        reason = None
        if not converged:
            reason = "no_convergence"
        elif w < thresholds.manipulability_min:
            reason = "manipulability"
        elif sv[-1] < thresholds.sigma_min:
            reason = "singular_value"
        elif not limit_ok:
            reason = "joint_limit"
        records.append(
            SamplePoint(
                s=s,
                ik_converged=converged,
                manipulability=w,
                sigma_min=float(sv[-1]),
                joint_limit_ok=limit_ok,
                q=tuple(float(v) for v in q),
            )
        )
        if reason is not None and first_failure is None:
            first_failure = (s, reason)
        if converged:
            q_prev = q
    return FeasibilityReport(
        feasible=first_failure is None,
        samples=tuple(records),
        first_failure=first_failure,
    )


def planar_chain(
    link_lengths: Sequence[float],
    q_min: float = -math.pi,
    q_max: float = math.pi,
) -> ChainModel:
    """Planar chain of revolute z-joints in the x-y plane.

    The last link length lands in the flange offset, so a 2R chain with unit
    links reaches (2, 0, 0) at q = (0, 0).
    """
    lengths = [float(l) for l in link_lengths]
    if not lengths:
        raise ValueError("need at least one link")
    joints = [JointParams(a=0.0, d=0.0, alpha=0.0, q_min=q_min, q_max=q_max)]
    for l in lengths[:-1]:
        joints.append(JointParams(a=l, d=0.0, alpha=0.0, q_min=q_min, q_max=q_max))
    flange = Pose(UnitQuaternion.identity(), Vec3(lengths[-1], 0.0, 0.0))
    return ChainModel(tuple(joints), flange, name=f"planar_{len(lengths)}r")
