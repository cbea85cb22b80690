"""Reward terms for shared-control training, with the built-in weight
profiles, returned as an auditable per-term breakdown.

Two methods exist: method 1 tracks the full linear velocity (v_x, v_y)
against the user input; method 2 tracks only v_x and separately punishes
lateral motion so the platform strafes only when it has to. A profile
selects method 2 by carrying a lateral-punishment weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CollisionCapsule, LidarScan, threshold_arrays
from .user import UserInput


@dataclass(frozen=True)
class RewardWeights:
    r_c: float
    r_crit: float
    r_col: float
    r_h: float
    phi_thresh: float
    r_a: float
    r_l: float
    r_vy: float | None
    r_as: float
    # critical-band aggregation: "max" penalizes the worst ray, keeping the
    # weights comparable across scan resolutions (the same weights are
    # shared by 36- and 360-ray models); "sum" additionally penalizes being
    # surrounded but scales with ray count
    obstacle_aggregation: str = "max"

    def __post_init__(self):
        if not (self.r_col < self.r_c <= 0):
            raise ValueError("require r_col < r_c <= 0")
        if self.r_a <= 0:
            raise ValueError("require r_a > 0")
        if self.r_l >= 0:
            raise ValueError("require r_l < 0")
        if self.phi_thresh < 0:
            raise ValueError("require phi_thresh >= 0")
        if self.obstacle_aggregation not in ("sum", "max"):
            raise ValueError("obstacle_aggregation must be 'sum' or 'max'")

    @property
    def method(self) -> int:
        return 2 if self.r_vy is not None else 1


#: Built-in weight profiles. "FC_LFC" is shared by the two fully connected
#: models; "R1" by the convolutional models trained with method 1; "R2" is
#: the method-2 profile of the small convolutional model.
REWARD_PROFILES: dict[str, RewardWeights] = {
    "FC_LFC": RewardWeights(
        r_c=-2.0, r_crit=-10.0, r_col=-100.0, r_h=-0.2, phi_thresh=0.2,
        r_a=0.5, r_l=-0.5, r_vy=None, r_as=-0.02,
    ),
    "R1": RewardWeights(
        r_c=-1.0, r_crit=-1.0, r_col=-100.0, r_h=-0.2, phi_thresh=0.2,
        r_a=0.5, r_l=-0.5, r_vy=None, r_as=-0.02,
    ),
    "R2": RewardWeights(
        r_c=-1.0, r_crit=-1.0, r_col=-100.0, r_h=-0.5, phi_thresh=0.2,
        r_a=0.5, r_l=-0.5, r_vy=-1.6, r_as=-0.02,
    ),
}

_PROFILE_ALIASES = {
    "FC": "FC_LFC",
    "LFC": "FC_LFC",
    "CLFC": "R1",
    "CLFC_D": "R1",
    "SCLFC_D_R1": "R1",
    "SCLFC_D_R2": "R2",
}


def resolve_reward_profile(name: str) -> RewardWeights:
    key = name.strip()
    key = _PROFILE_ALIASES.get(key, key)
    try:
        return REWARD_PROFILES[key]
    except KeyError:
        known = sorted(set(REWARD_PROFILES) | set(_PROFILE_ALIASES))
        raise KeyError(f"unknown reward profile {name!r}; known: {', '.join(known)}") from None


@dataclass(frozen=True)
class RewardBreakdown:
    obstacles: float
    heading: float
    tracking: float
    vy_penalty: float
    smoothing_1: float
    smoothing_2: float

    @property
    def total(self) -> float:
        return (
            self.obstacles
            + self.heading
            + self.tracking
            + self.vy_penalty
            + self.smoothing_1
            + self.smoothing_2
        )


def obstacle_term(scan: LidarScan, capsule: CollisionCapsule, w: RewardWeights) -> float:
    """Summed proximity penalty over all rays.

    Rays in the critical band contribute a quadratic penalty; if any ray is
    inside the collision boundary the (terminal) collision weight is applied
    once for the step and collision rays contribute nothing else.
    """
    d_col, d_crit = threshold_arrays(capsule, scan.spec)
    d = scan.ranges
    collided = d < d_col
    critical = (d < d_crit) & ~collided
    total = 0.0
    if critical.any():
        gap = d_crit[critical] - d[critical]
        contributions = w.r_c + w.r_crit * gap * gap
        if w.obstacle_aggregation == "sum":
            total += float(np.sum(contributions))
        else:
            total += float(np.min(contributions))  # worst (most negative) ray
    if collided.any():
        total += w.r_col
    return total


def heading_term(phi: float, w: RewardWeights) -> float:
    """Quadratic penalty on the heading angle beyond the tolerance band."""
    if abs(phi) > w.phi_thresh:
        return w.r_h * phi * phi
    return 0.0


def tracking_term(
    action: np.ndarray, u: UserInput, w: RewardWeights, method: int | None = None
) -> tuple[float, float]:
    """(tracking, vy_penalty) for a normalized action (vx, vy, omega).

    Method 1 rewards matching the full linear velocity to the input; method
    2 rewards matching only the forward component and punishes lateral
    speed.
    """
    if method is None:
        method = w.method
    if method == 1:
        err = (action[0] - u.ux) ** 2 + (action[1] - u.uy) ** 2
        return w.r_a * math.exp(w.r_l * err), 0.0
    if w.r_vy is None:
        raise ValueError("method 2 requires the lateral punishment weight")
    err = (action[0] - u.ux) ** 2
    return w.r_a * math.exp(w.r_l * err), w.r_vy * action[1] ** 2


def smoothing_terms(
    a_t: np.ndarray, a_prev: np.ndarray, a_prev2: np.ndarray, w: RewardWeights
) -> tuple[float, float]:
    """First- and second-difference action penalties over the 3-vector."""
    d1 = a_t - a_prev
    d2 = a_t - 2.0 * a_prev + a_prev2
    return w.r_as * float(d1 @ d1), w.r_as * float(d2 @ d2)


def total_reward(
    scan: LidarScan,
    capsule: CollisionCapsule,
    action: np.ndarray,
    last_action: np.ndarray,
    second_last_action: np.ndarray,
    u: UserInput,
    phi: float,
    w: RewardWeights,
) -> RewardBreakdown:
    """Assemble the per-term breakdown; the method follows the profile."""
    tracking, vy_penalty = tracking_term(action, u, w)
    s1, s2 = smoothing_terms(action, last_action, second_last_action, w)
    return RewardBreakdown(
        obstacles=obstacle_term(scan, capsule, w),
        heading=heading_term(phi, w),
        tracking=tracking,
        vy_penalty=vy_penalty,
        smoothing_1=s1,
        smoothing_2=s2,
    )
