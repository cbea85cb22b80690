"""Observation assembly and action conversion shared by the environments,
the trainer, and the evaluation adapters.

Observation layout (length n_rays + 11):
  [lidar ranges / max_range] + [ux, uy] + [vx, vy, omega normalized]
  + [last action (3)] + [second last action (3)]

Actions are 3-vectors in the symmetric normalized range [-1, 1] and map
linearly to the signed velocity limits.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import LidarScan, VelocityCommand
from .user import UserInput

ACTION_DIM = 3
EXTRA_OBS_DIM = 11

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def observation_dim(n_rays: int) -> int:
    return n_rays + EXTRA_OBS_DIM


def assemble_observation(
    scan: LidarScan,
    u: UserInput,
    measured_velocity: VelocityCommand,
    last_action: np.ndarray,
    second_last_action: np.ndarray,
    v_max_lin: float,
    omega_max: float,
) -> np.ndarray:
    n = scan.spec.n_rays
    out = np.empty(n + EXTRA_OBS_DIM, dtype=np.float32)
    out[:n] = scan.ranges / scan.spec.max_range
    out[n] = u.ux
    out[n + 1] = u.uy
    out[n + 2] = measured_velocity.vx / v_max_lin
    out[n + 3] = measured_velocity.vy / v_max_lin
    out[n + 4] = measured_velocity.omega / omega_max
    out[n + 5 : n + 8] = last_action
    out[n + 8 : n + 11] = second_last_action
    return out


def scale_action(action: np.ndarray, v_max_lin: float, omega_max: float) -> VelocityCommand:
    """Map a normalized action to signed body-frame velocity limits."""
    return VelocityCommand(
        vx=float(action[0]) * v_max_lin,
        vy=float(action[1]) * v_max_lin,
        omega=float(action[2]) * omega_max,
    )


def sample_action(mean: np.ndarray, log_std: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Gaussian sample per component, squashed into the normalized range."""
    std = np.exp(log_std)
    return np.clip(mean + std * rng.standard_normal(mean.shape), -1.0, 1.0)


def gaussian_log_prob(action: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Diagonal Gaussian log density, summed over the action dimension."""
    z = (action - mean) / np.exp(log_std)
    return np.sum(-0.5 * z * z - log_std - _LOG_SQRT_2PI, axis=-1)
