"""Deterministic motion planning and scenario simulation for adaptive
robot-to-human object handover."""

__version__ = "0.1.0"

from .fsm import (
    FsmState,
    HandoverFsm,
    HandoverMode,
    PlanInfeasibleError,
    PlannerConfig,
    PlanResult,
    TickInput,
    TickOutput,
    plan_adaptive,
    plan_static,
)
from .hand_stream import (
    Box,
    GraspOffset,
    HandSample,
    MissingTaskError,
    NoiseSpec,
    ParseError,
    SmoothingSpec,
    TaskId,
    prepare_stream,
)
from .kinematics import (
    ChainModel,
    FeasibilityReport,
    JointLimitError,
    JointParams,
    NoConvergenceError,
    ValidationThresholds,
    forward_kinematics,
    jacobian,
    manipulability,
    solve_ik,
    validate_trajectory,
)
from .runlog import RunLog, RunMetrics, export_trajectory, read_run_log, write_run_log
from .runner import ComparisonReport, compare_modes, run_scenario
from .scenario import Scenario, load_scenario, scenario_from_document
from .se3 import (
    CameraIntrinsics,
    FrameTag,
    Pose,
    UnitQuaternion,
    Vec3,
    back_project,
    grasp_target,
    hand_in_base,
    slerp,
)
from .trajectory import (
    BezierPath,
    MotionLaw,
    OrientationPlan,
    PoseTrajectory,
    build_control_points,
    eval_pose,
    max_cartesian_jerk,
)

__all__ = [
    "__version__",
    "FsmState",
    "HandoverFsm",
    "HandoverMode",
    "PlanInfeasibleError",
    "PlannerConfig",
    "PlanResult",
    "TickInput",
    "TickOutput",
    "plan_adaptive",
    "plan_static",
    "Box",
    "GraspOffset",
    "HandSample",
    "MissingTaskError",
    "NoiseSpec",
    "ParseError",
    "SmoothingSpec",
    "TaskId",
    "prepare_stream",
    "ChainModel",
    "FeasibilityReport",
    "JointLimitError",
    "JointParams",
    "NoConvergenceError",
    "ValidationThresholds",
    "forward_kinematics",
    "jacobian",
    "manipulability",
    "solve_ik",
    "validate_trajectory",
    "RunLog",
    "RunMetrics",
    "export_trajectory",
    "read_run_log",
    "write_run_log",
    "ComparisonReport",
    "compare_modes",
    "run_scenario",
    "Scenario",
    "load_scenario",
    "scenario_from_document",
    "CameraIntrinsics",
    "FrameTag",
    "Pose",
    "UnitQuaternion",
    "Vec3",
    "back_project",
    "grasp_target",
    "hand_in_base",
    "slerp",
    "BezierPath",
    "MotionLaw",
    "OrientationPlan",
    "PoseTrajectory",
    "build_control_points",
    "eval_pose",
    "max_cartesian_jerk",
]
