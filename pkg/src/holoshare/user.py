"""Joystick input model: simulated intent toward a fictional target during
training, and normalization of manual input at test time.

The joystick vector lives in the body frame (+x forward, +y left). The
simulated input always has unit norm; manual input keeps its extension
level but is clamped to the unit disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Pose2D, Vec2

MANUAL_DEADZONE = 0.05


@dataclass(frozen=True)
class UserInput:
    ux: float
    uy: float

    @property
    def norm(self) -> float:
        return math.hypot(self.ux, self.uy)


def simulated_input(pose: Pose2D, target: Vec2) -> UserInput:
    """Unit vector toward the target, expressed in the robot body frame.

    Returns (0, 0) in the degenerate case where the robot sits exactly on
    the target (the episode should already have ended there).
    """
    dx = target.x - pose.position.x
    dy = target.y - pose.position.y
    dist = math.hypot(dx, dy)
    if dist < 1e-9:
        return UserInput(0.0, 0.0)
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return UserInput((c * dx + s * dy) / dist, (-s * dx + c * dy) / dist)


def clamp_manual_input(raw_x: float, raw_y: float) -> UserInput:
    """Rescale manual joystick input to the unit disk; small inputs are
    treated as idle (real joysticks never rest at an exact zero)."""
    norm = math.hypot(raw_x, raw_y)
    if norm < MANUAL_DEADZONE:
        return UserInput(0.0, 0.0)
    if norm > 1.0:
        return UserInput(raw_x / norm, raw_y / norm)
    return UserInput(raw_x, raw_y)
