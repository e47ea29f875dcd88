"""Shared fixtures and small random-geometry helpers."""

import math
from pathlib import Path

import numpy as np
import pytest

from handover_sim.se3 import Pose, UnitQuaternion, Vec3
from handover_sim.scenario import load_robot_model

FIXTURES = Path(__file__).parent / "fixtures"


def random_quaternion(rng: np.random.Generator) -> UnitQuaternion:
    """Uniform random rotation (normalized 4-vector of gaussians)."""
    w, x, y, z = rng.normal(size=4)
    return UnitQuaternion(float(w), float(x), float(y), float(z))


def random_vec3(rng: np.random.Generator, scale: float = 1.0) -> Vec3:
    v = rng.uniform(-scale, scale, 3)
    return Vec3(float(v[0]), float(v[1]), float(v[2]))


def random_pose(rng: np.random.Generator, scale: float = 1.0) -> Pose:
    return Pose(random_quaternion(rng), random_vec3(rng, scale))


def random_unit_vec3(rng: np.random.Generator) -> Vec3:
    while True:
        v = rng.normal(size=3)
        n = float(np.linalg.norm(v))
        if n > 1e-6:
            return Vec3(float(v[0] / n), float(v[1] / n), float(v[2] / n))


def quat_close(a: UnitQuaternion, b: UnitQuaternion, tol: float) -> bool:
    """Componentwise closeness up to the global sign ambiguity."""
    same = max(abs(a.w - b.w), abs(a.x - b.x), abs(a.y - b.y), abs(a.z - b.z))
    flip = max(abs(a.w + b.w), abs(a.x + b.x), abs(a.y + b.y), abs(a.z + b.z))
    return min(same, flip) <= tol


@pytest.fixture(scope="session")
def panda():
    """(ChainModel, ValidationThresholds) for the packaged 7-DOF arm."""
    return load_robot_model("panda")


@pytest.fixture(scope="session")
def flange_down() -> UnitQuaternion:
    """Flange orientation pointing straight down (half turn about x)."""
    return UnitQuaternion(0.0, 1.0, 0.0, 0.0)


def pitched_down_orientation(degrees: float) -> UnitQuaternion:
    """Flange-down orientation pitched about +y so the body x-axis dips."""
    qy = UnitQuaternion.from_axis_angle(Vec3(0.0, 1.0, 0.0), math.radians(degrees))
    return qy.multiply(UnitQuaternion(0.0, 1.0, 0.0, 0.0))
