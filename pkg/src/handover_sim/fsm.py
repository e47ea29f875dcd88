"""Handover orchestration: target selection, the alpha-shrink planning loop,
and the tick-driven state machine.

States and transitions:

    Idle -> PickObject              scenario start
    PickObject -> AwaitHand         object secured in the gripper
    AwaitHand -> Plan               hand dwells in the handover volume
                                    (static mode plans immediately)
    Plan -> Approach | Fault        plan validated / infeasible
    Plan -> AwaitHand               hand left the volume before planning
    Approach -> OfferHold | Fault   trajectory time elapsed / replan infeasible
    OfferHold -> Release            external release signal
    Release -> Retract -> Done

Adaptive mode re-plans inside Approach when the filtered hand pose drifts
beyond the configured thresholds from the pose the current plan was built
for; the replan happens within the same tick so the commanded pose stays
continuous.  Static mode ignores the hand entirely and drives to a fixed
pose.  Every trajectory the machine commands has passed validation first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .hand_stream import (
    Box,
    GraspOffset,
    TaskId,
    grasp_offset_for,
    in_handover_volume,
    palm_approach_direction,
)
from .kinematics import ChainModel, FeasibilityReport, ValidationThresholds, validate_trajectory
from .se3 import Pose, Vec3, grasp_target
from .trajectory import (
    ApproachSpec,
    BezierPath,
    MotionLaw,
    OrientationPlan,
    PoseTrajectory,
    build_control_points,
    duration_for,
    eval_pose,
    quintic_s,
    resolve_start_direction,
)

__all__ = [
    "HandoverMode",
    "FsmState",
    "PlannerConfig",
    "TickInput",
    "TickOutput",
    "Event",
    "PlanAttempt",
    "PlanResult",
    "PlanInfeasibleError",
    "HandOutsideVolumeError",
    "InvalidTransitionError",
    "HandoverFsm",
    "plan_adaptive",
    "plan_static",
    "max_plan_attempts",
    "TRANSITIONS",
]

_DEGENERATE_EPS = 1e-9


class HandoverMode(Enum):
    STATIC = "static"
    ADAPTIVE = "adaptive"


class FsmState(Enum):
    IDLE = "idle"
    PICK_OBJECT = "pick_object"
    AWAIT_HAND = "await_hand"
    PLAN = "plan"
    APPROACH = "approach"
    OFFER_HOLD = "offer_hold"
    RELEASE = "release"
    RETRACT = "retract"
    DONE = "done"
    FAULT = "fault"


TRANSITIONS: Dict[FsmState, frozenset] = {
    FsmState.IDLE: frozenset({FsmState.PICK_OBJECT}),
    FsmState.PICK_OBJECT: frozenset({FsmState.AWAIT_HAND}),
    FsmState.AWAIT_HAND: frozenset({FsmState.PLAN}),
    FsmState.PLAN: frozenset({FsmState.APPROACH, FsmState.FAULT, FsmState.AWAIT_HAND}),
    FsmState.APPROACH: frozenset({FsmState.OFFER_HOLD, FsmState.FAULT}),
    FsmState.OFFER_HOLD: frozenset({FsmState.RELEASE}),
    FsmState.RELEASE: frozenset({FsmState.RETRACT}),
    FsmState.RETRACT: frozenset({FsmState.DONE}),
    FsmState.DONE: frozenset(),
    FsmState.FAULT: frozenset(),
}


class PlanInfeasibleError(RuntimeError):
    """Every alpha scaling attempt failed validation."""

    def __init__(self, message: str, attempts: Tuple["PlanAttempt", ...]):
        super().__init__(message)
        self.attempts = attempts


class HandOutsideVolumeError(ValueError):
    """Adaptive planning requires the hand inside the handover volume."""


class InvalidTransitionError(RuntimeError):
    """Internal guard: the machine attempted an edge not in the transition graph."""


@dataclass(frozen=True)
class PlannerConfig:
    static_pose: Pose
    handover_volume: Box
    alpha_s: float = 0.15
    alpha_a: float = 0.15
    alpha_shrink: float = 0.8
    alpha_min: float = 0.02
    lock_factor: float = 0.7
    loop_rate: float = 30.0
    replan_pos_threshold: float = 0.03
    replan_rot_threshold: float = 0.15
    dwell_ticks: int = 10
    avg_speed: float = 0.25
    min_duration: float = 1.5
    n_validation_samples: int = 50

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha_shrink < 1.0):
            raise ValueError("alpha_shrink must be in (0, 1)")
        if not (0.0 < self.alpha_min < min(self.alpha_s, self.alpha_a)):
            raise ValueError("alpha_min must be positive and below the initial alphas")
        if not (0.0 < self.lock_factor <= 1.0):
            raise ValueError("lock_factor must be in (0, 1]")
        for name in ("loop_rate", "replan_pos_threshold", "replan_rot_threshold", "avg_speed", "min_duration"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.dwell_ticks < 1:
            raise ValueError("dwell_ticks must be >= 1")
        if self.n_validation_samples < 10:
            raise ValueError("n_validation_samples must be >= 10")


@dataclass(frozen=True)
class TickInput:
    time: float
    latest_hand_pose: Optional[Pose]
    task: TaskId
    object_in_gripper: bool
    release_signal: bool


@dataclass(frozen=True)
class Event:
    kind: str
    info: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class TickOutput:
    state: FsmState
    commanded_pose: Optional[Pose]
    events: Tuple[Event, ...]
    traj_time: Optional[float] = None
    path_param: Optional[float] = None


@dataclass(frozen=True)
class PlanAttempt:
    alpha_s: float
    alpha_a: float
    feasible: bool
    first_failure: Optional[Tuple[float, str]]


@dataclass(frozen=True)
class PlanResult:
    trajectory: PoseTrajectory
    target: Pose
    hand_pose: Optional[Pose]
    alpha_s: float
    alpha_a: float
    attempts: Tuple[PlanAttempt, ...]
    report: FeasibilityReport

    @property
    def n_scalings(self) -> int:
        return len(self.attempts) - 1


def max_plan_attempts(alpha_s: float, alpha_a: float, alpha_shrink: float, alpha_min: float) -> int:
    """Closed-form bound on validation attempts: ceil(log(alpha_min/alpha0) /
    log(shrink)) + 1, with alpha0 the smaller initial alpha."""
    alpha0 = min(alpha_s, alpha_a)
    return math.ceil(math.log(alpha_min / alpha0) / math.log(alpha_shrink)) + 1


def _plan_to_target(
    current_object_pose: Pose,
    target: Pose,
    d_a: Optional[Vec3],
    config: PlannerConfig,
    model: ChainModel,
    thresholds: ValidationThresholds,
    hand_pose: Optional[Pose],
    ik_seed=None,
) -> PlanResult:
    p0 = current_object_pose.translation
    p3 = target.translation
    dist = (p3 - p0).norm()
    law = MotionLaw(duration_for(dist, config.avg_speed, config.min_duration))
    orient = OrientationPlan(current_object_pose.rotation, target.rotation, config.lock_factor)

    if dist < _DEGENERATE_EPS:
        # Zero-length path: nothing to shape, validate the held pose once.
        traj = PoseTrajectory(BezierPath.point(p0), law, orient)
        report = validate_trajectory(
            model, traj, thresholds, config.n_validation_samples, seed=ik_seed
        )
        attempts = (PlanAttempt(config.alpha_s, config.alpha_a, report.feasible, report.first_failure),)
        if not report.feasible:
            raise PlanInfeasibleError("degenerate plan failed validation", attempts)
        return PlanResult(traj, target, hand_pose, config.alpha_s, config.alpha_a, attempts, report)

    if d_a is None:
        d_a = (p3 - p0) * (1.0 / dist)
    d_s = resolve_start_direction(
        current_object_pose.rotation.rotate(Vec3(1.0, 0.0, 0.0)), p0, p3
    )

    a_s, a_a = config.alpha_s, config.alpha_a
    attempts: List[PlanAttempt] = []
    while True:
        path = build_control_points(p0, p3, ApproachSpec(d_s, d_a, a_s, a_a))
        traj = PoseTrajectory(path, law, orient)
        report = validate_trajectory(
            model, traj, thresholds, config.n_validation_samples, seed=ik_seed
        )
        attempts.append(PlanAttempt(a_s, a_a, report.feasible, report.first_failure))
        if report.feasible:
            return PlanResult(traj, target, hand_pose, a_s, a_a, tuple(attempts), report)
        a_s *= config.alpha_shrink
        a_a *= config.alpha_shrink
        if min(a_s, a_a) < config.alpha_min:
            raise PlanInfeasibleError(
                f"no feasible approach after {len(attempts)} validation attempts",
                tuple(attempts),
            )


def plan_adaptive(
    hand_pose: Pose,
    task: TaskId,
    current_object_pose: Pose,
    config: PlannerConfig,
    model: ChainModel,
    thresholds: ValidationThresholds,
    catalog: Sequence[GraspOffset],
    ik_seed=None,
) -> PlanResult:
    """Plan toward grasp_target(hand_pose, T_H_G) with the alpha-shrink loop.

    The hand must already be inside the handover volume; the arrival
    direction is the hand-frame -Z axis (outward palm normal flipped).
    """
    if not in_handover_volume(hand_pose, config.handover_volume):
        raise HandOutsideVolumeError("hand pose is outside the handover volume")
    offset = grasp_offset_for(task, catalog)
    target = grasp_target(hand_pose, offset)
    d_a = palm_approach_direction(hand_pose)
    return _plan_to_target(
        current_object_pose, target, d_a, config, model, thresholds, hand_pose, ik_seed
    )


def plan_static(
    current_object_pose: Pose,
    config: PlannerConfig,
    model: ChainModel,
    thresholds: ValidationThresholds,
    ik_seed=None,
) -> PlanResult:
    """Plan toward the fixed handover pose; the arrival direction degrades to
    the chord since no hand is tracked."""
    return _plan_to_target(
        current_object_pose, config.static_pose, None, config, model, thresholds, None, ik_seed
    )


def _pose_info(pose: Pose) -> Dict[str, Any]:
    t, q = pose.translation, pose.rotation
    return {"position": [t.x, t.y, t.z], "quaternion": [q.w, q.x, q.y, q.z]}


def _plan_events(result: PlanResult) -> List[Event]:
    events: List[Event] = []
    for attempt, nxt in zip(result.attempts, result.attempts[1:]):
        s, reason = attempt.first_failure
        events.append(Event("validation_failed", {"s": s, "reason": reason}))
        events.append(Event("scaled_alpha", {"alpha_s": nxt.alpha_s, "alpha_a": nxt.alpha_a}))
    events.append(
        Event(
            "planned",
            {
                "target": _pose_info(result.target),
                "hand_pose": _pose_info(result.hand_pose) if result.hand_pose else None,
                "alpha_s": result.alpha_s,
                "alpha_a": result.alpha_a,
                "duration": result.trajectory.law.duration,
                "n_scalings": result.n_scalings,
            },
        )
    )
    return events


def _infeasible_events(exc: PlanInfeasibleError, shrink: float) -> List[Event]:
    events: List[Event] = []
    for i, attempt in enumerate(exc.attempts):
        s, reason = attempt.first_failure
        events.append(Event("validation_failed", {"s": s, "reason": reason}))
        if i + 1 < len(exc.attempts):
            events.append(
                Event(
                    "scaled_alpha",
                    {"alpha_s": attempt.alpha_s * shrink, "alpha_a": attempt.alpha_a * shrink},
                )
            )
    events.append(Event("plan_infeasible", {"attempts": len(exc.attempts)}))
    return events


class HandoverFsm:
    """Deterministic tick-driven handover controller.

    One state transition per tick, except a mid-approach replan which stays
    in Approach and re-plans within the tick.  Commanded poses come only
    from trajectories that passed validation.
    """

    def __init__(
        self,
        mode: HandoverMode,
        config: PlannerConfig,
        model: ChainModel,
        thresholds: ValidationThresholds,
        catalog: Sequence[GraspOffset],
        initial_object_pose: Pose,
    ):
        self.mode = mode
        self.config = config
        self.model = model
        self.thresholds = thresholds
        self.catalog = tuple(catalog)
        self.state = FsmState.IDLE
        self.object_pose = initial_object_pose
        self.plan: Optional[PlanResult] = None
        self._approach_t0: Optional[float] = None
        self._dwell = 0
        self._last_time: Optional[float] = None

    @property
    def trajectory(self) -> Optional[PoseTrajectory]:
        return self.plan.trajectory if self.plan is not None else None

    def _to(self, nxt: FsmState) -> None:
        if nxt not in TRANSITIONS[self.state]:
            raise InvalidTransitionError(f"illegal transition {self.state.value} -> {nxt.value}")
        self.state = nxt

    def _hand_ready(self, inp: TickInput) -> bool:
        return inp.latest_hand_pose is not None and in_handover_volume(
            inp.latest_hand_pose, self.config.handover_volume
        )

    def _run_planner(self, inp: TickInput, events: List[Event]) -> bool:
        """Plan from the current object pose; True on success."""
        try:
            if self.mode == HandoverMode.ADAPTIVE:
                result = plan_adaptive(
                    inp.latest_hand_pose,
                    inp.task,
                    self.object_pose,
                    self.config,
                    self.model,
                    self.thresholds,
                    self.catalog,
                )
            else:
                result = plan_static(
                    self.object_pose, self.config, self.model, self.thresholds
                )
        except PlanInfeasibleError as exc:
            events.extend(_infeasible_events(exc, self.config.alpha_shrink))
            return False
        self.plan = result
        events.extend(_plan_events(result))
        return True

    def _deviation_exceeded(self, hand: Pose) -> bool:
        anchor = self.plan.hand_pose
        dp = (hand.translation - anchor.translation).norm()
        dr = anchor.rotation.angle_to(hand.rotation)
        return dp > self.config.replan_pos_threshold or dr > self.config.replan_rot_threshold

    def tick(self, inp: TickInput) -> TickOutput:
        if self._last_time is not None and inp.time <= self._last_time:
            raise ValueError(
                f"tick time must be strictly increasing: {inp.time} after {self._last_time}"
            )
        self._last_time = inp.time

        events: List[Event] = []
        commanded: Optional[Pose] = None
        traj_time: Optional[float] = None
        path_param: Optional[float] = None

        if self.state == FsmState.IDLE:
            self._to(FsmState.PICK_OBJECT)

        elif self.state == FsmState.PICK_OBJECT:
            if inp.object_in_gripper:
                self._to(FsmState.AWAIT_HAND)

        elif self.state == FsmState.AWAIT_HAND:
            if self.mode == HandoverMode.STATIC:
                self._to(FsmState.PLAN)
            else:
                self._dwell = self._dwell + 1 if self._hand_ready(inp) else 0
                if self._dwell >= self.config.dwell_ticks:
                    self._to(FsmState.PLAN)

        elif self.state == FsmState.PLAN:
            if self.mode == HandoverMode.ADAPTIVE and not self._hand_ready(inp):
                self._dwell = 0
                self._to(FsmState.AWAIT_HAND)
            elif self._run_planner(inp, events):
                self._approach_t0 = inp.time
                self._to(FsmState.APPROACH)
                commanded = eval_pose(self.plan.trajectory, 0.0)
                traj_time, path_param = 0.0, 0.0
            else:
                self._to(FsmState.FAULT)

        elif self.state == FsmState.APPROACH:
            replanned = False
            if (
                self.mode == HandoverMode.ADAPTIVE
                and inp.latest_hand_pose is not None
                and self._deviation_exceeded(inp.latest_hand_pose)
            ):
                t_now = min(inp.time - self._approach_t0, self.plan.trajectory.law.duration)
                self.object_pose = eval_pose(self.plan.trajectory, t_now)
                hand = inp.latest_hand_pose
                events.append(
                    Event(
                        "replanned",
                        {
                            "pos_dev": (hand.translation - self.plan.hand_pose.translation).norm(),
                            "rot_dev": self.plan.hand_pose.rotation.angle_to(hand.rotation),
                        },
                    )
                )
                if self._run_planner(inp, events):
                    self._approach_t0 = inp.time
                    commanded = eval_pose(self.plan.trajectory, 0.0)
                    traj_time, path_param = 0.0, 0.0
                    replanned = True
                else:
                    self._to(FsmState.FAULT)
                    return TickOutput(self.state, None, tuple(events))
            if not replanned:
                T = self.plan.trajectory.law.duration
                t = inp.time - self._approach_t0
                if t >= T:
                    commanded = eval_pose(self.plan.trajectory, T)
                    traj_time, path_param = T, 1.0
                    self._to(FsmState.OFFER_HOLD)
                else:
                    commanded = eval_pose(self.plan.trajectory, t)
                    traj_time = t
                    path_param = quintic_s(t, T)[0]

        elif self.state == FsmState.OFFER_HOLD:
            commanded = eval_pose(self.plan.trajectory, self.plan.trajectory.law.duration)
            if inp.release_signal:
                events.append(Event("released", {}))
                self._to(FsmState.RELEASE)

        elif self.state == FsmState.RELEASE:
            commanded = eval_pose(self.plan.trajectory, self.plan.trajectory.law.duration)
            self._to(FsmState.RETRACT)

        elif self.state == FsmState.RETRACT:
            self._to(FsmState.DONE)

        return TickOutput(self.state, commanded, tuple(events), traj_time, path_param)
