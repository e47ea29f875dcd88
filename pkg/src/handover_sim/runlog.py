"""Run logs, metrics, and trajectory export.

A RunLog is a plain JSON document: header (scenario id, mode, seed, config
digest), the final plan parameters, per-tick records, a flattened event
list, and the run metrics.  Serialization is canonical (sorted keys, compact
separators) so identical runs produce identical bytes.

Trajectory exports cover the ticks where a trajectory was actively tracked
and come in two interchangeable formats: CSV (one row per sample) and JSON
({"samples": [...]}); both round-trip through read_trajectory_export.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .fsm import FsmState
from .se3 import Pose, UnitQuaternion, Vec3
from .trajectory import BezierPath, MotionLaw, OrientationPlan, PoseTrajectory

__all__ = [
    "RunMetrics",
    "TickRecord",
    "RunLog",
    "ExportRow",
    "trajectory_from_plan_dict",
    "export_trajectory",
    "read_trajectory_export",
    "write_run_log",
    "read_run_log",
]

EXPORT_COLUMNS = ("t", "s", "x", "y", "z", "qw", "qx", "qy", "qz", "speed", "jerk", "state")


@dataclass(frozen=True)
class RunMetrics:
    """Motion-side quality numbers for one run.

    orientation_settle_s is the first path parameter s at which the
    commanded orientation is locked on the target (the lock factor, or 0
    when start and target rotations coincide); it is unitless.  Fields
    stay None for runs that never produced a plan.
    """

    feasible: bool
    final_state: str
    n_replans: int
    n_alpha_scalings: int
    duration_T: Optional[float] = None
    final_pos_error: Optional[float] = None
    final_rot_error: Optional[float] = None
    max_cartesian_jerk: Optional[float] = None
    orientation_settle_s: Optional[float] = None
    jerk_grid_samples: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RunMetrics":
        return cls(**d)


@dataclass(frozen=True)
class TickRecord:
    index: int
    time: float
    state: str
    commanded: Optional[Dict[str, List[float]]]
    traj_time: Optional[float]
    s: Optional[float]
    speed: Optional[float]
    jerk: Optional[float]
    events: Tuple[Dict[str, Any], ...]

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["events"] = list(self.events)
        return d


@dataclass(frozen=True)
class RunLog:
    header: Dict[str, Any]
    plan: Optional[Dict[str, Any]]
    ticks: Tuple[TickRecord, ...]
    events: Tuple[Dict[str, Any], ...]
    metrics: RunMetrics

    def to_document(self) -> Dict[str, Any]:
        return {
            "header": self.header,
            "plan": self.plan,
            "ticks": [t.to_dict() for t in self.ticks],
            "events": list(self.events),
            "metrics": self.metrics.to_dict(),
        }

    def to_json_bytes(self) -> bytes:
        text = json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"), allow_nan=False)
        return (text + "\n").encode("utf-8")

    @classmethod
    def from_document(cls, doc: Dict[str, Any]) -> "RunLog":
        ticks = tuple(
            TickRecord(
                index=t["index"],
                time=t["time"],
                state=t["state"],
                commanded=t["commanded"],
                traj_time=t["traj_time"],
                s=t["s"],
                speed=t["speed"],
                jerk=t["jerk"],
                events=tuple(t["events"]),
            )
            for t in doc["ticks"]
        )
        return cls(
            header=doc["header"],
            plan=doc["plan"],
            ticks=ticks,
            events=tuple(doc["events"]),
            metrics=RunMetrics.from_dict(doc["metrics"]),
        )

    @property
    def final_commanded_pose(self) -> Optional[Pose]:
        for tick in reversed(self.ticks):
            if tick.commanded is not None:
                pos = tick.commanded["position"]
                quat = tick.commanded["quaternion"]
                return Pose(
                    UnitQuaternion(quat[0], quat[1], quat[2], quat[3]),
                    Vec3(pos[0], pos[1], pos[2]),
                )
        return None

    def exit_code(self) -> int:
        done = self.metrics.final_state == FsmState.DONE.value
        return 0 if (done and self.metrics.feasible) else 1


def write_run_log(log: RunLog, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(log.to_json_bytes())
    return path


def read_run_log(path) -> RunLog:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunLog.from_document(doc)


def trajectory_from_plan_dict(plan: Dict[str, Any]) -> PoseTrajectory:
    """Rebuild the executed trajectory from the plan parameters in a log."""
    pts = [Vec3(*plan[k]) for k in ("p0", "p1", "p2", "p3")]
    degenerate = bool(plan.get("degenerate", False))
    path = BezierPath(*pts, degenerate=degenerate)
    orient = OrientationPlan(
        UnitQuaternion(*plan["q_start"]),
        UnitQuaternion(*plan["q_target"]),
        float(plan["lock_factor"]),
    )
    return PoseTrajectory(path, MotionLaw(float(plan["duration"])), orient)


@dataclass(frozen=True)
class ExportRow:
    t: float
    s: float
    x: float
    y: float
    z: float
    qw: float
    qx: float
    qy: float
    qz: float
    speed: float
    jerk: float
    state: str


def _export_rows(log: RunLog) -> List[ExportRow]:
    rows = []
    for tick in log.ticks:
        if tick.traj_time is None or tick.commanded is None:
            continue
        pos = tick.commanded["position"]
        quat = tick.commanded["quaternion"]
        rows.append(
            ExportRow(
                t=float(tick.traj_time),
                s=float(tick.s),
                x=float(pos[0]),
                y=float(pos[1]),
                z=float(pos[2]),
                qw=float(quat[0]),
                qx=float(quat[1]),
                qy=float(quat[2]),
                qz=float(quat[3]),
                speed=float(tick.speed) if tick.speed is not None else 0.0,
                jerk=float(tick.jerk) if tick.jerk is not None else 0.0,
                state=tick.state,
            )
        )
    return rows


def export_trajectory(log: RunLog, fmt: str, path) -> Path:
    """Write time-indexed trajectory samples as 'csv' or 'json'.

    A run that never planned produces a header-only CSV / an empty JSON
    sample list.  Floats are written with repr precision so a read-back
    reproduces the values exactly.
    """
    rows = _export_rows(log)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(EXPORT_COLUMNS)
        for row in rows:
            writer.writerow(
                [repr(getattr(row, c)) if c != "state" else row.state for c in EXPORT_COLUMNS]
            )
        path.write_text(buf.getvalue(), encoding="utf-8")
    elif fmt == "json":
        doc = {"columns": list(EXPORT_COLUMNS), "samples": [asdict(r) for r in rows]}
        path.write_text(
            json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n",
            encoding="utf-8",
        )
    else:
        raise ValueError(f"unknown export format {fmt!r}; expected 'csv' or 'json'")
    return path


def read_trajectory_export(path) -> List[ExportRow]:
    """Read back either export format (detected from the content)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    rows: List[ExportRow] = []
    if stripped.startswith("{"):
        doc = json.loads(text)
        for rec in doc["samples"]:
            rows.append(ExportRow(**rec))
        return rows
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != EXPORT_COLUMNS:
        raise ValueError(f"unexpected export header: {header!r}")
    for rec in reader:
        values = {}
        for name, raw in zip(EXPORT_COLUMNS, rec):
            values[name] = raw if name == "state" else float(raw)
        rows.append(ExportRow(**values))
    return rows


def pose_angle_error(a: Pose, b: Pose) -> Tuple[float, float]:
    """(position distance, rotation angle) between two poses."""
    dp = (a.translation - b.translation).norm()
    dr = a.rotation.angle_to(b.rotation)
    if not (math.isfinite(dp) and math.isfinite(dr)):
        raise ValueError("pose error must be finite")
    return dp, dr
