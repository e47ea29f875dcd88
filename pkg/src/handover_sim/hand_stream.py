"""Hand detections and their path into the planner.

A stream holds one sample encoding throughout: either a camera-frame pose per
sample, or a pixel + depth + rotation triple that is back-projected through
the scenario's pinhole intrinsics at load time.  Samples are timestamped,
strictly increasing, and flow through (optional) sensor noise, the camera
calibration, and an exponential moving-average filter before the planner
sees them.

Hand frame convention: +Z is the outward palm normal and +X points from the
wrist toward the middle metacarpus.  The planner's arrival direction d_a is
the hand-frame -Z axis expressed in base coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .se3 import (
    CameraIntrinsics,
    FrameTag,
    Pose,
    UnitQuaternion,
    Vec3,
    back_project,
    hand_in_base,
    slerp,
)

__all__ = [
    "ParseError",
    "MissingTaskError",
    "TaskId",
    "HandSample",
    "GraspOffset",
    "NoiseSpec",
    "SmoothingSpec",
    "Box",
    "load_stream",
    "to_base_frame",
    "smooth",
    "in_handover_volume",
    "grasp_offset_for",
    "apply_noise",
    "prepare_stream",
    "palm_approach_direction",
]


class ParseError(ValueError):
    """Malformed scenario / stream / config content."""


class MissingTaskError(LookupError):
    """Grasp-offset catalog has no entry for the requested task."""


class TaskId(Enum):
    MUG_DRINK = "mug_drink"
    MUG_PASS = "mug_pass"
    MUG_DISHWASHER = "mug_dishwasher"
    PHONE_PLACE = "phone_place"
    PHONE_PASS = "phone_pass"
    PHONE_CHARGE = "phone_charge"

    @classmethod
    def parse(cls, text: str) -> "TaskId":
        try:
            return cls(text)
        except ValueError:
            valid = ", ".join(t.value for t in cls)
            raise ParseError(f"unknown task {text!r}; expected one of: {valid}") from None


@dataclass(frozen=True)
class HandSample:
    """One detection.  After load_stream the camera-frame pose is always set;
    pixel/depth are retained when the stream used that encoding."""

    timestamp: float
    pose: Pose
    pixel: Optional[Tuple[float, float]] = None
    depth: Optional[float] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")


@dataclass(frozen=True)
class GraspOffset:
    """Constant hand-to-grasp transform T_H_G for one task."""

    task: TaskId
    offset: Pose
    description: str = ""

    def __post_init__(self) -> None:
        if self.offset.translation.norm() >= 0.5:
            raise ValueError("grasp offset translation must stay below 0.5 m")


@dataclass(frozen=True)
class NoiseSpec:
    position_sigma: float = 0.0
    rotation_sigma: float = 0.0
    dropout_prob: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.position_sigma < 0.0 or self.rotation_sigma < 0.0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError("dropout_prob must be in [0, 1)")


@dataclass(frozen=True)
class SmoothingSpec:
    kind: str = "exponential_ma"  # "none" | "exponential_ma"
    alpha: float = 0.3

    def __post_init__(self) -> None:
        if self.kind not in ("none", "exponential_ma"):
            raise ValueError(f"unknown smoothing kind {self.kind!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("smoothing alpha must be in (0, 1]")


@dataclass(frozen=True)
class Box:
    """Axis-aligned volume with inclusive bounds."""

    min_corner: Vec3
    max_corner: Vec3

    def __post_init__(self) -> None:
        if not (
            self.min_corner.x < self.max_corner.x
            and self.min_corner.y < self.max_corner.y
            and self.min_corner.z < self.max_corner.z
        ):
            raise ValueError("box min corner must be strictly below max corner on every axis")

    def contains(self, p: Vec3) -> bool:
        return (
            self.min_corner.x <= p.x <= self.max_corner.x
            and self.min_corner.y <= p.y <= self.max_corner.y
            and self.min_corner.z <= p.z <= self.max_corner.z
        )


def _parse_quat(raw, where: str) -> UnitQuaternion:
    try:
        w, x, y, z = (float(v) for v in raw)
        return UnitQuaternion(w, x, y, z)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: bad quaternion {raw!r} ({exc})") from None


def _parse_vec(raw, where: str) -> Vec3:
    try:
        x, y, z = (float(v) for v in raw)
        return Vec3(x, y, z)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: bad vector {raw!r} ({exc})") from None


def load_stream(section: dict, intrinsics: Optional[CameraIntrinsics] = None) -> List[HandSample]:
    """Parse a hand-stream section into camera-frame samples.

    `section` is {"encoding": "pose" | "pixel_depth", "samples": [...]}.
    Pose records carry {t, position, quaternion}; pixel records carry
    {t, pixel: [u, v], depth, quaternion} and are back-projected through
    the supplied intrinsics.  Timestamps must be strictly increasing.
    """
    if not isinstance(section, dict):
        raise ParseError("hand_stream must be a mapping")
    encoding = section.get("encoding")
    if encoding not in ("pose", "pixel_depth"):
        raise ParseError(f"hand_stream.encoding must be 'pose' or 'pixel_depth', got {encoding!r}")
    raw_samples = section.get("samples", [])
    if not isinstance(raw_samples, list):
        raise ParseError("hand_stream.samples must be a list")
    if encoding == "pixel_depth" and intrinsics is None:
        raise ParseError("pixel_depth streams require camera intrinsics")

    samples: List[HandSample] = []
    last_t = None
    for idx, rec in enumerate(raw_samples):
        where = f"hand_stream.samples[{idx}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: expected a mapping")
        try:
            t = float(rec["t"])
        except (KeyError, TypeError, ValueError):
            raise ParseError(f"{where}: missing or bad timestamp 't'") from None
        if last_t is not None and t <= last_t:
            raise ParseError(f"{where}: timestamps must be strictly increasing ({t} after {last_t})")
        last_t = t
        rot = _parse_quat(rec.get("quaternion"), where)
        if encoding == "pose":
            if "pixel" in rec or "depth" in rec:
                raise ParseError(f"{where}: pose-encoded stream must not carry pixel/depth fields")
            pos = _parse_vec(rec.get("position"), where)
            pose = Pose(rot, pos, (FrameTag.CAMERA, FrameTag.HAND))
            samples.append(HandSample(t, pose))
        else:
            if "position" in rec:
                raise ParseError(f"{where}: pixel_depth stream must not carry a position field")
            try:
                u, v = (float(c) for c in rec["pixel"])
                depth = float(rec["depth"])
            except (KeyError, TypeError, ValueError):
                raise ParseError(f"{where}: missing or bad pixel/depth fields") from None
            try:
                pos = back_project(u, v, depth, intrinsics)
            except ValueError as exc:
                raise ParseError(f"{where}: {exc}") from None
            pose = Pose(rot, pos, (FrameTag.CAMERA, FrameTag.HAND))
            samples.append(HandSample(t, pose, pixel=(u, v), depth=depth))
    return samples


def to_base_frame(sample: HandSample, calib: Pose) -> Pose:
    """T_B_H = T_B_C * T_C_H for one sample."""
    return hand_in_base(calib, sample.pose)


def smooth(prev: Optional[Pose], raw: Pose, spec: SmoothingSpec) -> Pose:
    """Exponential moving average: lerp on translation, slerp on rotation.

    The first sample (prev is None) passes through unchanged, as does
    kind="none" or alpha=1.
    """
    if spec.kind == "none" or prev is None or spec.alpha == 1.0:
        return raw
    a = spec.alpha
    t = prev.translation + a * (raw.translation - prev.translation)
    return Pose(slerp(prev.rotation, raw.rotation, a), t, raw.frames)


def in_handover_volume(pose: Pose, volume: Box) -> bool:
    return volume.contains(pose.translation)


def grasp_offset_for(task: TaskId, catalog: Sequence[GraspOffset]) -> Pose:
    """Look up T_H_G for a task, tagged hand->grasp."""
    for entry in catalog:
        if entry.task == task:
            off = entry.offset
            return Pose(off.rotation, off.translation, (FrameTag.HAND, FrameTag.GRASP))
    raise MissingTaskError(f"no grasp offset for task {task.value!r}")


def apply_noise(
    sample: HandSample, spec: NoiseSpec, rng: np.random.Generator
) -> Optional[HandSample]:
    """Seeded sensor-noise model: dropout, isotropic position noise, and
    small-angle rotation noise.  Returns None when the sample is dropped.
    Zero sigmas and zero dropout leave the sample unchanged."""
    if rng.uniform() < spec.dropout_prob:
        return None
    dp = rng.normal(0.0, spec.position_sigma, 3)
    dr = rng.normal(0.0, spec.rotation_sigma, 3)
    pose = sample.pose
    if spec.position_sigma > 0.0:
        t = Vec3(
            float(pose.translation.x + dp[0]),
            float(pose.translation.y + dp[1]),
            float(pose.translation.z + dp[2]),
        )
    else:
        t = pose.translation
    angle = float(np.linalg.norm(dr))
    if angle > 0.0:
        dq = UnitQuaternion.from_axis_angle(Vec3(float(dr[0]), float(dr[1]), float(dr[2])), angle)
        rot = dq.multiply(pose.rotation)
    else:
        rot = pose.rotation
    return replace(sample, pose=Pose(rot, t, pose.frames))


def prepare_stream(
    samples: Sequence[HandSample],
    calib: Pose,
    noise: NoiseSpec,
    smoothing: SmoothingSpec,
    rng: np.random.Generator,
) -> List[Tuple[float, Pose]]:
    """Full sensing pipeline: noise (camera frame) -> base frame -> smoothing.

    Dropped samples vanish; ordering is preserved.  Returns (timestamp,
    filtered base-frame pose) pairs ready for latest-value consumption.
    """
    out: List[Tuple[float, Pose]] = []
    prev: Optional[Pose] = None
    for sample in samples:
        noisy = apply_noise(sample, noise, rng)
        if noisy is None:
            continue
        base_pose = to_base_frame(noisy, calib)
        filtered = smooth(prev, base_pose, smoothing)
        prev = filtered
        out.append((sample.timestamp, filtered))
    return out


def palm_approach_direction(hand_pose: Pose) -> Vec3:
    """Arrival direction d_a: the hand-frame -Z axis in base coordinates."""
    return hand_pose.rotation.rotate(Vec3(0.0, 0.0, -1.0))
