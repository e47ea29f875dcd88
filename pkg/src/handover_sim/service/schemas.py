"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator

Mode = Literal["static", "adaptive"]


class PoseModel(BaseModel):
    position: List[float] = Field(..., min_length=3, max_length=3)
    quaternion: List[float] = Field(..., min_length=4, max_length=4, description="w, x, y, z")

    @field_validator("position", "quaternion")
    @classmethod
    def _finite(cls, v: List[float]) -> List[float]:
        for x in v:
            if x != x or x in (float("inf"), float("-inf")):
                raise ValueError("components must be finite")
        return v


class BoxModel(BaseModel):
    min: List[float] = Field(..., min_length=3, max_length=3)
    max: List[float] = Field(..., min_length=3, max_length=3)


class RunRequest(BaseModel):
    scenario: Dict[str, Any]
    mode: Mode = "adaptive"
    seed: Optional[int] = None
    overrides: Optional[Dict[str, Any]] = None


class RunResponse(BaseModel):
    exit_code: int
    run_log: Dict[str, Any]


class CompareRequest(BaseModel):
    scenario: Dict[str, Any]
    seed: Optional[int] = None
    overrides: Optional[Dict[str, Any]] = None


class CompareResponse(BaseModel):
    exit_code: int
    report: Dict[str, Any]


class ValidateRequest(BaseModel):
    scenario: Dict[str, Any]
    mode: Mode = "adaptive"
    seed: Optional[int] = None
    overrides: Optional[Dict[str, Any]] = None


class ValidateResponse(BaseModel):
    valid: bool
    scenario_id: Optional[str] = None
    config_digest: Optional[str] = None
    error: Optional[str] = None


class PlanRequest(BaseModel):
    mode: Mode = "adaptive"
    task: str = "mug_pass"
    object_pose: PoseModel
    hand_pose: Optional[PoseModel] = None
    static_pose: Optional[PoseModel] = None
    handover_volume: BoxModel
    planner: Optional[Dict[str, Any]] = None
    robot: Union[str, Dict[str, Any]] = "panda"
    grasp_offsets: Union[str, List[Dict[str, Any]]] = "default"
    thresholds: Optional[Dict[str, Any]] = None


class PlanResponse(BaseModel):
    feasible: bool
    plan: Optional[Dict[str, Any]] = None
    events: List[Dict[str, Any]] = Field(default_factory=list)
    error: Optional[str] = None


class TrajectorySampleRequest(BaseModel):
    plan: Dict[str, Any]
    times: Optional[List[float]] = None
    n_samples: int = 50

    @field_validator("n_samples")
    @classmethod
    def _enough(cls, v: int) -> int:
        if v < 2:
            raise ValueError("n_samples must be >= 2")
        return v


class TrajectorySampleResponse(BaseModel):
    samples: List[Dict[str, Any]]


class IKRequest(BaseModel):
    target: PoseModel
    robot: Union[str, Dict[str, Any]] = "panda"
    seed_q: Optional[List[float]] = None
    thresholds: Optional[Dict[str, Any]] = None


class IKResponse(BaseModel):
    converged: bool
    q: Optional[List[float]] = None
    error: Optional[str] = None


class HealthResponse(BaseModel):
    status: str
    version: str
