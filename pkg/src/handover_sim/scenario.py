"""Scenario and robot-model files.

Both are plain UTF-8 YAML.  A scenario bundles everything one simulated
handover needs: camera intrinsics, the base<-camera calibration, the
handover volume, the task, a grasp-offset catalog (inline, file path, or the
packaged default), the robot model (inline, path, or a packaged name),
planner configuration, noise/smoothing specs, the timestamped hand stream,
and scripted gripper/release events.  See the repository README for the full
field reference.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .fsm import PlannerConfig
from .hand_stream import (
    Box,
    GraspOffset,
    HandSample,
    NoiseSpec,
    ParseError,
    SmoothingSpec,
    TaskId,
    load_stream,
)
from .kinematics import ChainModel, JointParams, ValidationThresholds
from .se3 import CameraIntrinsics, FrameTag, Pose, UnitQuaternion, Vec3

__all__ = [
    "Scenario",
    "ScriptedEvent",
    "load_scenario",
    "scenario_from_document",
    "load_robot_model",
    "load_grasp_catalog",
    "default_grasp_catalog",
    "apply_overrides",
    "parse_override",
    "config_digest",
    "pose_from_mapping",
    "pose_to_mapping",
]

_PACKAGED_ROBOTS = ("panda",)


def _data_text(name: str) -> str:
    return resources.files("handover_sim.data").joinpath(name).read_text(encoding="utf-8")


def _require(doc: dict, key: str, where: str = "scenario"):
    if key not in doc:
        raise ParseError(f"{where}: missing required field {key!r}")
    return doc[key]


def pose_from_mapping(raw, where: str, frames: Optional[Tuple[FrameTag, FrameTag]] = None) -> Pose:
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: expected a mapping with position/quaternion")
    try:
        px, py, pz = (float(v) for v in _require(raw, "position", where))
        qw, qx, qy, qz = (float(v) for v in _require(raw, "quaternion", where))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: bad pose ({exc})") from None
    try:
        return Pose(UnitQuaternion(qw, qx, qy, qz), Vec3(px, py, pz), frames)
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


def pose_to_mapping(pose: Pose) -> Dict[str, List[float]]:
    t, q = pose.translation, pose.rotation
    return {"position": [t.x, t.y, t.z], "quaternion": [q.w, q.x, q.y, q.z]}


@dataclass(frozen=True)
class ScriptedEvent:
    time: float
    object_in_gripper: Optional[bool] = None
    release: Optional[bool] = None


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    task: TaskId
    intrinsics: CameraIntrinsics
    calibration: Pose
    planner: PlannerConfig
    model: ChainModel
    thresholds: ValidationThresholds
    catalog: Tuple[GraspOffset, ...]
    initial_object_pose: Pose
    noise: NoiseSpec
    smoothing: SmoothingSpec
    samples: Tuple[HandSample, ...]
    events: Tuple[ScriptedEvent, ...]
    document: Dict[str, Any]

    def end_time(self) -> float:
        """Last scripted instant in the scenario."""
        times = [s.timestamp for s in self.samples] + [e.time for e in self.events]
        return max(times) if times else 0.0


def _build_thresholds(defaults: ValidationThresholds, raw: Optional[dict]) -> ValidationThresholds:
    if raw is None:
        return defaults
    if not isinstance(raw, dict):
        raise ParseError("thresholds: expected a mapping")
    valid = {f.name for f in fields(ValidationThresholds)}
    unknown = set(raw) - valid
    if unknown:
        raise ParseError(f"thresholds: unknown fields {sorted(unknown)}")
    try:
        return replace(defaults, **{k: type(getattr(defaults, k))(v) for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise ParseError(f"thresholds: {exc}") from None


def load_robot_model(source, base_dir: Optional[Path] = None) -> Tuple[ChainModel, ValidationThresholds]:
    """Robot model from a packaged name ("panda"), a YAML path, or an inline
    mapping.  Returns the chain and its default validation thresholds."""
    if isinstance(source, str):
        if source in _PACKAGED_ROBOTS:
            doc = yaml.safe_load(_data_text(f"{source}.yaml"))
        else:
            path = Path(source)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ParseError(f"robot model not found: {source!r}")
            doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    elif isinstance(source, dict):
        doc = source
    else:
        raise ParseError(f"robot: expected a name, path, or mapping, got {type(source).__name__}")
    if not isinstance(doc, dict):
        raise ParseError("robot model file must contain a mapping")

    raw_joints = _require(doc, "joints", "robot")
    if not isinstance(raw_joints, list) or not raw_joints:
        raise ParseError("robot.joints must be a non-empty list")
    joints = []
    for i, rec in enumerate(raw_joints):
        where = f"robot.joints[{i}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: expected a mapping")
        try:
            joints.append(
                JointParams(
                    a=float(rec.get("a", 0.0)),
                    d=float(rec.get("d", 0.0)),
                    alpha=float(rec.get("alpha", 0.0)),
                    theta_offset=float(rec.get("theta_offset", 0.0)),
                    q_min=float(_require(rec, "q_min", where)),
                    q_max=float(_require(rec, "q_max", where)),
                    velocity_limit=float(rec.get("velocity_limit", float("inf"))),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{where}: {exc}") from None

    flange = Pose.identity()
    if "flange_offset" in doc:
        flange = pose_from_mapping(doc["flange_offset"], "robot.flange_offset")
    home = None
    if doc.get("home") is not None:
        home = tuple(float(v) for v in doc["home"])
    try:
        model = ChainModel(tuple(joints), flange, name=str(doc.get("name", "chain")), home=home)
    except ValueError as exc:
        raise ParseError(f"robot: {exc}") from None
    thresholds = _build_thresholds(ValidationThresholds(), doc.get("thresholds"))
    return model, thresholds


def load_grasp_catalog(source, base_dir: Optional[Path] = None) -> Tuple[GraspOffset, ...]:
    """Catalog from the packaged default ("default"), a YAML path, or an
    inline list of entries."""
    if isinstance(source, str):
        if source == "default":
            doc = yaml.safe_load(_data_text("default_grasp_offsets.yaml"))
        else:
            path = Path(source)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ParseError(f"grasp catalog not found: {source!r}")
            doc = yaml.safe_load(path.read_text(encoding="utf-8"))
        entries = doc.get("offsets") if isinstance(doc, dict) else doc
    elif isinstance(source, list):
        entries = source
    else:
        raise ParseError("grasp_offsets: expected 'default', a path, or an inline list")
    if not isinstance(entries, list) or not entries:
        raise ParseError("grasp catalog must be a non-empty list")
    catalog = []
    for i, rec in enumerate(entries):
        where = f"grasp_offsets[{i}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: expected a mapping")
        task = TaskId.parse(str(_require(rec, "task", where)))
        pose = pose_from_mapping(rec, where)
        try:
            catalog.append(GraspOffset(task, pose, str(rec.get("description", ""))))
        except ValueError as exc:
            raise ParseError(f"{where}: {exc}") from None
    return tuple(catalog)


def default_grasp_catalog() -> Tuple[GraspOffset, ...]:
    return load_grasp_catalog("default")


def _build_planner(raw, volume: Box, where: str = "planner") -> PlannerConfig:
    if not isinstance(raw, dict):
        raise ParseError(f"{where}: expected a mapping")
    raw = dict(raw)
    static_raw = _require(raw, "static_pose", where)
    static_pose = pose_from_mapping(static_raw, f"{where}.static_pose")
    del raw["static_pose"]
    valid = {f.name for f in fields(PlannerConfig)} - {"static_pose", "handover_volume"}
    unknown = set(raw) - valid
    if unknown:
        raise ParseError(f"{where}: unknown fields {sorted(unknown)}")
    kwargs: Dict[str, Any] = {}
    for key, value in raw.items():
        kwargs[key] = int(value) if key in ("dwell_ticks", "n_validation_samples") else float(value)
    try:
        return PlannerConfig(static_pose=static_pose, handover_volume=volume, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: {exc}") from None


def _build_events(raw) -> Tuple[ScriptedEvent, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ParseError("events must be a list")
    events = []
    for i, rec in enumerate(raw):
        where = f"events[{i}]"
        if not isinstance(rec, dict) or "t" not in rec:
            raise ParseError(f"{where}: expected a mapping with a 't' field")
        keys = set(rec) - {"t"}
        if not keys <= {"object_in_gripper", "release"}:
            raise ParseError(f"{where}: unknown event fields {sorted(keys - {'object_in_gripper', 'release'})}")
        try:
            events.append(
                ScriptedEvent(
                    time=float(rec["t"]),
                    object_in_gripper=(
                        bool(rec["object_in_gripper"]) if "object_in_gripper" in rec else None
                    ),
                    release=bool(rec["release"]) if "release" in rec else None,
                )
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{where}: {exc}") from None
    return tuple(sorted(events, key=lambda e: e.time))


def scenario_from_document(doc: Dict[str, Any], base_dir: Optional[Path] = None) -> Scenario:
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a mapping")
    scenario_id = str(_require(doc, "id"))
    task = TaskId.parse(str(_require(doc, "task")))

    cam = _require(doc, "camera")
    if not isinstance(cam, dict):
        raise ParseError("camera: expected a mapping")
    try:
        intrinsics = CameraIntrinsics(
            fx=float(_require(cam, "fx", "camera")),
            fy=float(_require(cam, "fy", "camera")),
            cx=float(_require(cam, "cx", "camera")),
            cy=float(_require(cam, "cy", "camera")),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"camera: {exc}") from None

    calibration = pose_from_mapping(
        _require(doc, "calibration"), "calibration", (FrameTag.BASE, FrameTag.CAMERA)
    )

    vol = _require(doc, "handover_volume")
    if not isinstance(vol, dict):
        raise ParseError("handover_volume: expected a mapping with min/max")
    try:
        volume = Box(
            Vec3(*(float(v) for v in _require(vol, "min", "handover_volume"))),
            Vec3(*(float(v) for v in _require(vol, "max", "handover_volume"))),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"handover_volume: {exc}") from None

    model, default_thresholds = load_robot_model(doc.get("robot", "panda"), base_dir)
    thresholds = _build_thresholds(default_thresholds, doc.get("thresholds"))
    catalog = load_grasp_catalog(doc.get("grasp_offsets", "default"), base_dir)
    planner = _build_planner(_require(doc, "planner"), volume)
    initial_object_pose = pose_from_mapping(
        _require(doc, "initial_object_pose"), "initial_object_pose"
    )

    noise_raw = doc.get("noise") or {}
    if not isinstance(noise_raw, dict):
        raise ParseError("noise: expected a mapping")
    try:
        noise = NoiseSpec(
            position_sigma=float(noise_raw.get("position_sigma", 0.0)),
            rotation_sigma=float(noise_raw.get("rotation_sigma", 0.0)),
            dropout_prob=float(noise_raw.get("dropout_prob", 0.0)),
            rng_seed=int(noise_raw.get("rng_seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"noise: {exc}") from None

    smooth_raw = doc.get("smoothing") or {}
    if not isinstance(smooth_raw, dict):
        raise ParseError("smoothing: expected a mapping")
    try:
        smoothing = SmoothingSpec(
            kind=str(smooth_raw.get("kind", "exponential_ma")),
            alpha=float(smooth_raw.get("alpha", 0.3)),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"smoothing: {exc}") from None

    samples = load_stream(_require(doc, "hand_stream"), intrinsics)
    events = _build_events(doc.get("events"))
    return Scenario(
        scenario_id=scenario_id,
        task=task,
        intrinsics=intrinsics,
        calibration=calibration,
        planner=planner,
        model=model,
        thresholds=thresholds,
        catalog=catalog,
        initial_object_pose=initial_object_pose,
        noise=noise,
        smoothing=smoothing,
        samples=tuple(samples),
        events=events,
        document=doc,
    )


def load_scenario(path, overrides: Optional[Dict[str, Any]] = None) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"scenario file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in {path.name}: {exc}") from None
    if overrides:
        doc = apply_overrides(doc, overrides)
    return scenario_from_document(doc, base_dir=path.parent)


def parse_override(text: str) -> Tuple[str, Any]:
    """Split a KEY=VALUE override; the value is parsed as a YAML scalar."""
    if "=" not in text:
        raise ParseError(f"override must look like key=value, got {text!r}")
    key, _, raw = text.partition("=")
    key = key.strip()
    if not key:
        raise ParseError(f"override has an empty key: {text!r}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return key, value


def apply_overrides(doc: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Apply dotted-path overrides to a copy of the document."""
    out = json.loads(json.dumps(doc))  # deep copy of plain YAML types
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = out
        for part in parts[:-1]:
            if not isinstance(node, dict):
                raise ParseError(f"override path {dotted!r} crosses a non-mapping node")
            node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ParseError(f"override path {dotted!r} crosses a non-mapping node")
        node[parts[-1]] = value
    return out


def config_digest(doc: Dict[str, Any], mode: str, seed: Optional[int]) -> str:
    """Stable digest of the effective run configuration."""
    canonical = json.dumps(
        {"scenario": doc, "mode": mode, "seed": seed},
        sort_keys=True,
        separators=(",", ":"),
        allow_nan=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
