"""FastAPI application exposing the planner and simulator.

Endpoints:

    GET  /health              liveness + version
    POST /scenario/run        execute one scenario document
    POST /scenario/compare    run both modes on one scenario document
    POST /scenario/validate   parse-check a scenario document
    POST /plan                one planning call (no simulation loop)
    POST /trajectory/sample   sample a plan's trajectory at given times
    POST /ik/solve            one damped-least-squares IK solve

The service is stateless; every request carries its full configuration.
Malformed domain input maps to HTTP 422 with the parse message.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..fsm import (
    HandoverMode,
    HandOutsideVolumeError,
    PlanInfeasibleError,
    PlannerConfig,
    _infeasible_events,
    _plan_events,
    plan_adaptive,
    plan_static,
)
from ..hand_stream import Box, MissingTaskError, ParseError, TaskId
from ..kinematics import (
    KinematicsError,
    solve_ik,
)
from ..runlog import trajectory_from_plan_dict
from ..runner import compare_modes, plan_result_to_dict, run_scenario
from ..scenario import (
    _build_thresholds,
    apply_overrides,
    config_digest,
    load_grasp_catalog,
    load_robot_model,
    pose_from_mapping,
    scenario_from_document,
)
from ..se3 import Vec3
from ..trajectory import cartesian_jerk, cartesian_speed, eval_pose, quintic_s
from .schemas import (
    CompareRequest,
    CompareResponse,
    HealthResponse,
    IKRequest,
    IKResponse,
    PlanRequest,
    PlanResponse,
    RunRequest,
    RunResponse,
    TrajectorySampleRequest,
    TrajectorySampleResponse,
    ValidateRequest,
    ValidateResponse,
)

__all__ = ["create_app", "app"]


def _domain_422(exc: Exception) -> HTTPException:
    return HTTPException(status_code=422, detail=str(exc))


def _planner_config(req: PlanRequest, volume: Box) -> PlannerConfig:
    static = req.static_pose if req.static_pose is not None else req.object_pose
    static_pose = pose_from_mapping(static.model_dump(), "static_pose")
    kwargs: Dict[str, Any] = {}
    for key, value in (req.planner or {}).items():
        kwargs[key] = int(value) if key in ("dwell_ticks", "n_validation_samples") else float(value)
    try:
        return PlannerConfig(static_pose=static_pose, handover_volume=volume, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"planner: {exc}") from None


def create_app() -> FastAPI:
    app = FastAPI(
        title="handover-sim",
        version=__version__,
        description="Deterministic handover motion planning and scenario simulation.",
    )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/scenario/run", response_model=RunResponse)
    def scenario_run(req: RunRequest) -> RunResponse:
        try:
            log = run_scenario(req.scenario, req.mode, req.overrides, req.seed)
        except ParseError as exc:
            raise _domain_422(exc) from None
        return RunResponse(exit_code=log.exit_code(), run_log=log.to_document())

    @app.post("/scenario/compare", response_model=CompareResponse)
    def scenario_compare(req: CompareRequest) -> CompareResponse:
        try:
            report = compare_modes(req.scenario, req.overrides, req.seed)
        except ParseError as exc:
            raise _domain_422(exc) from None
        return CompareResponse(exit_code=report.exit_code(), report=report.to_document())

    @app.post("/scenario/validate", response_model=ValidateResponse)
    def scenario_validate(req: ValidateRequest) -> ValidateResponse:
        doc = req.scenario
        try:
            if req.overrides:
                doc = apply_overrides(doc, req.overrides)
            scenario = scenario_from_document(doc)
        except ParseError as exc:
            return ValidateResponse(valid=False, error=str(exc))
        return ValidateResponse(
            valid=True,
            scenario_id=scenario.scenario_id,
            config_digest=config_digest(doc, req.mode, req.seed),
        )

    @app.post("/plan", response_model=PlanResponse)
    def plan(req: PlanRequest) -> PlanResponse:
        try:
            volume = Box(Vec3(*req.handover_volume.min), Vec3(*req.handover_volume.max))
            config = _planner_config(req, volume)
            model, default_thresholds = load_robot_model(req.robot)
            thresholds = _build_thresholds(default_thresholds, req.thresholds)
            object_pose = pose_from_mapping(req.object_pose.model_dump(), "object_pose")
            task = TaskId.parse(req.task)
            if req.mode == "adaptive":
                if req.hand_pose is None:
                    raise ParseError("adaptive planning requires hand_pose")
                catalog = load_grasp_catalog(req.grasp_offsets)
                hand_pose = pose_from_mapping(req.hand_pose.model_dump(), "hand_pose")
                result = plan_adaptive(
                    hand_pose, task, object_pose, config, model, thresholds, catalog
                )
            else:
                if req.static_pose is None:
                    raise ParseError("static planning requires static_pose")
                result = plan_static(object_pose, config, model, thresholds)
        except (ParseError, MissingTaskError, HandOutsideVolumeError, ValueError) as exc:
            raise _domain_422(exc) from None
        except PlanInfeasibleError as exc:
            shrink = config.alpha_shrink
            events = [{"kind": e.kind, "info": e.info} for e in _infeasible_events(exc, shrink)]
            return PlanResponse(feasible=False, events=events, error=str(exc))
        events = [{"kind": e.kind, "info": e.info} for e in _plan_events(result)]
        return PlanResponse(feasible=True, plan=plan_result_to_dict(result), events=events)

    @app.post("/trajectory/sample", response_model=TrajectorySampleResponse)
    def trajectory_sample(req: TrajectorySampleRequest) -> TrajectorySampleResponse:
        try:
            traj = trajectory_from_plan_dict(req.plan)
        except (KeyError, TypeError, ValueError) as exc:
            raise _domain_422(exc) from None
        T = traj.law.duration
        if req.times is not None:
            times = list(req.times)
            for t in times:
                if not 0.0 <= t <= T:
                    raise _domain_422(ValueError(f"time {t!r} outside [0, {T}]"))
        else:
            n = req.n_samples
            times = [T if i == n - 1 else i * (T / (n - 1)) for i in range(n)]
        samples: List[Dict[str, Any]] = []
        for t in times:
            pose = eval_pose(traj, t)
            p, q = pose.translation, pose.rotation
            samples.append(
                {
                    "t": t,
                    "s": quintic_s(t, T)[0],
                    "position": [p.x, p.y, p.z],
                    "quaternion": [q.w, q.x, q.y, q.z],
                    "speed": cartesian_speed(traj, t),
                    "jerk": cartesian_jerk(traj, t),
                }
            )
        return TrajectorySampleResponse(samples=samples)

    @app.post("/ik/solve", response_model=IKResponse)
    def ik_solve(req: IKRequest) -> IKResponse:
        try:
            model, default_thresholds = load_robot_model(req.robot)
            thresholds = _build_thresholds(default_thresholds, req.thresholds)
            target = pose_from_mapping(req.target.model_dump(), "target")
            seed_q = req.seed_q if req.seed_q is not None else model.neutral()
        except ParseError as exc:
            raise _domain_422(exc) from None
        try:
            q = solve_ik(model, target, seed_q, thresholds)
        except KinematicsError as exc:
            return IKResponse(converged=False, error=str(exc))
        except ValueError as exc:
            raise _domain_422(exc) from None
        return IKResponse(converged=True, q=[float(v) for v in q])

    return app


app = create_app()
