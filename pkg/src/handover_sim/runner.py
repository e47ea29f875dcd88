"""Scenario execution: the fixed-rate tick loop around the handover FSM.

run_scenario drives one scenario in one mode and returns a RunLog; the loop
is fully deterministic (seeded sensor noise, no wall clock), so the same
scenario + mode + seed always serializes to identical bytes.  compare_modes
runs both modes on the same scenario and collects side-by-side metrics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from .fsm import FsmState, HandoverFsm, HandoverMode, TickInput
from .hand_stream import prepare_stream
from .runlog import RunLog, RunMetrics, TickRecord, pose_angle_error
from .scenario import (
    Scenario,
    apply_overrides,
    config_digest,
    load_scenario,
    scenario_from_document,
)
from .se3 import Pose, UnitQuaternion, Vec3
from .trajectory import PoseTrajectory, cartesian_jerk, cartesian_speed, max_cartesian_jerk

__all__ = [
    "run_scenario",
    "compare_modes",
    "ComparisonReport",
    "orientation_settle_s",
    "plan_result_to_dict",
]

TAIL_SECONDS = 1.0
JERK_GRID_SAMPLES = 200

ScenarioSource = Union[Scenario, Dict[str, Any], str, Path]


def _coerce_scenario(source: ScenarioSource, overrides: Optional[Dict[str, Any]]) -> Scenario:
    if isinstance(source, Scenario):
        if overrides:
            return scenario_from_document(apply_overrides(source.document, overrides))
        return source
    if isinstance(source, dict):
        if overrides:
            source = apply_overrides(source, overrides)
        return scenario_from_document(source)
    return load_scenario(source, overrides)


def _coerce_mode(mode: Union[HandoverMode, str]) -> HandoverMode:
    if isinstance(mode, HandoverMode):
        return mode
    try:
        return HandoverMode(mode)
    except ValueError:
        raise ValueError(f"unknown mode {mode!r}; expected 'static' or 'adaptive'") from None


def orientation_settle_s(traj: PoseTrajectory) -> float:
    """First path parameter s with the orientation locked on its target:
    the lock factor, or 0 when there is no rotation to interpolate."""
    if traj.orientation.q_start.angle_to(traj.orientation.q_target) == 0.0:
        return 0.0
    return traj.orientation.lock_factor


def plan_result_to_dict(plan) -> Dict[str, Any]:
    """Serialize a PlanResult into the plan section of a run log; the
    trajectory can be rebuilt from it with trajectory_from_plan_dict."""
    path = plan.trajectory.path
    orient = plan.trajectory.orientation
    return {
        "p0": [path.p0.x, path.p0.y, path.p0.z],
        "p1": [path.p1.x, path.p1.y, path.p1.z],
        "p2": [path.p2.x, path.p2.y, path.p2.z],
        "p3": [path.p3.x, path.p3.y, path.p3.z],
        "degenerate": path.degenerate,
        "duration": plan.trajectory.law.duration,
        "q_start": [orient.q_start.w, orient.q_start.x, orient.q_start.y, orient.q_start.z],
        "q_target": [orient.q_target.w, orient.q_target.x, orient.q_target.y, orient.q_target.z],
        "lock_factor": orient.lock_factor,
        "alpha_s": plan.alpha_s,
        "alpha_a": plan.alpha_a,
        "n_scalings": plan.n_scalings,
        "target": _pose_dict(plan.target),
        "hand_pose": _pose_dict(plan.hand_pose) if plan.hand_pose is not None else None,
    }


def _pose_dict(pose: Pose) -> Dict[str, List[float]]:
    t, q = pose.translation, pose.rotation
    return {"position": [t.x, t.y, t.z], "quaternion": [q.w, q.x, q.y, q.z]}


def run_scenario(
    source: ScenarioSource,
    mode: Union[HandoverMode, str],
    overrides: Optional[Dict[str, Any]] = None,
    seed: Optional[int] = None,
) -> RunLog:
    """Execute one scenario and return its log.

    `seed`, when given, replaces the scenario's noise seed.  The log's exit
    code is 0 only for a run that reached Done on a validated plan.
    """
    scenario = _coerce_scenario(source, overrides)
    mode = _coerce_mode(mode)
    effective_seed = seed if seed is not None else scenario.noise.rng_seed

    rng = np.random.default_rng(effective_seed)
    noise = replace(scenario.noise, rng_seed=effective_seed)
    prepared = prepare_stream(scenario.samples, scenario.calibration, noise, scenario.smoothing, rng)

    fsm = HandoverFsm(
        mode,
        scenario.planner,
        scenario.model,
        scenario.thresholds,
        scenario.catalog,
        scenario.initial_object_pose,
    )

    rate = scenario.planner.loop_rate
    horizon = scenario.end_time() + TAIL_SECONDS
    n_ticks = int(math.ceil(horizon * rate)) + 1

    ticks: List[TickRecord] = []
    flat_events: List[Dict[str, Any]] = []
    latest_hand: Optional[Pose] = None
    sample_idx = 0
    event_idx = 0
    gripper = False
    release = False

    for k in range(n_ticks):
        t = k / rate
        while sample_idx < len(prepared) and prepared[sample_idx][0] <= t:
            latest_hand = prepared[sample_idx][1]
            sample_idx += 1
        while event_idx < len(scenario.events) and scenario.events[event_idx].time <= t:
            ev = scenario.events[event_idx]
            if ev.object_in_gripper is not None:
                gripper = ev.object_in_gripper
            if ev.release is not None:
                release = ev.release
            event_idx += 1

        out = fsm.tick(TickInput(t, latest_hand, scenario.task, gripper, release))

        speed = jerk = None
        if out.traj_time is not None and fsm.trajectory is not None:
            speed = cartesian_speed(fsm.trajectory, out.traj_time)
            jerk = cartesian_jerk(fsm.trajectory, out.traj_time)
        tick_events = tuple({"kind": e.kind, "info": e.info} for e in out.events)
        ticks.append(
            TickRecord(
                index=k,
                time=t,
                state=out.state.value,
                commanded=_pose_dict(out.commanded_pose) if out.commanded_pose else None,
                traj_time=out.traj_time,
                s=out.path_param,
                speed=speed,
                jerk=jerk,
                events=tick_events,
            )
        )
        for e in out.events:
            flat_events.append({"tick": k, "t": t, "kind": e.kind, "info": e.info})
        if out.state in (FsmState.DONE, FsmState.FAULT):
            break

    n_replans = sum(1 for e in flat_events if e["kind"] == "replanned")
    n_scalings = sum(1 for e in flat_events if e["kind"] == "scaled_alpha")
    plan = fsm.plan
    if plan is not None:
        traj = plan.trajectory
        final = _final_commanded(ticks)
        pos_err = rot_err = None
        if final is not None:
            pos_err, rot_err = pose_angle_error(final, plan.target)
        metrics = RunMetrics(
            feasible=True,
            final_state=fsm.state.value,
            n_replans=n_replans,
            n_alpha_scalings=n_scalings,
            duration_T=traj.law.duration,
            final_pos_error=pos_err,
            final_rot_error=rot_err,
            max_cartesian_jerk=max_cartesian_jerk(traj, JERK_GRID_SAMPLES),
            orientation_settle_s=orientation_settle_s(traj),
            jerk_grid_samples=JERK_GRID_SAMPLES,
        )
    else:
        metrics = RunMetrics(
            feasible=False,
            final_state=fsm.state.value,
            n_replans=n_replans,
            n_alpha_scalings=n_scalings,
        )

    header = {
        "scenario_id": scenario.scenario_id,
        "mode": mode.value,
        "seed": effective_seed,
        "config_digest": config_digest(scenario.document, mode.value, effective_seed),
        "loop_rate": rate,
        "task": scenario.task.value,
    }
    return RunLog(
        header=header,
        plan=plan_result_to_dict(plan) if plan is not None else None,
        ticks=tuple(ticks),
        events=tuple(flat_events),
        metrics=metrics,
    )


def _final_commanded(ticks: List[TickRecord]) -> Optional[Pose]:
    for tick in reversed(ticks):
        if tick.commanded is not None:
            p = tick.commanded["position"]
            q = tick.commanded["quaternion"]
            return Pose(UnitQuaternion(q[0], q[1], q[2], q[3]), Vec3(p[0], p[1], p[2]))
    return None


@dataclass(frozen=True)
class ComparisonReport:
    scenario_id: str
    static: RunLog
    adaptive: RunLog

    def summary(self) -> Dict[str, Any]:
        s, a = self.static.metrics, self.adaptive.metrics
        deltas: Dict[str, Optional[float]] = {}
        for name in ("duration_T", "final_pos_error", "final_rot_error", "max_cartesian_jerk", "orientation_settle_s"):
            sv, av = getattr(s, name), getattr(a, name)
            deltas[name] = (av - sv) if (sv is not None and av is not None) else None
        deltas["n_replans"] = a.n_replans - s.n_replans
        deltas["n_alpha_scalings"] = a.n_alpha_scalings - s.n_alpha_scalings
        return {
            "static": s.to_dict(),
            "adaptive": a.to_dict(),
            "deltas_adaptive_minus_static": deltas,
            "exit_codes": {"static": self.static.exit_code(), "adaptive": self.adaptive.exit_code()},
        }

    def to_document(self) -> Dict[str, Any]:
        return {
            "scenario_id": self.scenario_id,
            "summary": self.summary(),
            "static": self.static.to_document(),
            "adaptive": self.adaptive.to_document(),
        }

    def to_json_bytes(self) -> bytes:
        return (
            json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"), allow_nan=False)
            + "\n"
        ).encode("utf-8")

    def exit_code(self) -> int:
        return max(self.static.exit_code(), self.adaptive.exit_code())


def compare_modes(
    source: ScenarioSource,
    overrides: Optional[Dict[str, Any]] = None,
    seed: Optional[int] = None,
) -> ComparisonReport:
    """Run the same scenario in static and adaptive mode with the same seed."""
    scenario = _coerce_scenario(source, overrides)
    static = run_scenario(scenario, HandoverMode.STATIC, seed=seed)
    adaptive = run_scenario(scenario, HandoverMode.ADAPTIVE, seed=seed)
    return ComparisonReport(scenario.scenario_id, static, adaptive)
