"""Policy adapters that map (scan, user input, state) to a normalized
action, used by the evaluation harness and the teleop service.

Adapters: a trained checkpoint (deterministic, mean action), the reactive
baseline, an echo stub (forwards the joystick as the linear command), and a
zero stub.
"""

from __future__ import annotations

import numpy as np

from .envs import EnvConfig, EpisodeState
from .geometry import LidarScan
from .obs import assemble_observation
from .rds import DEFAULT_TAU, build_constraints, solve_rds
from .user import UserInput


class PolicyAdapter:
    name: str = "base"
    n_rays: int | None = None  # None: any scan resolution works

    def reset(self) -> None:
        pass

    def act(
        self, scan: LidarScan, u: UserInput, state: EpisodeState, config: EnvConfig
    ) -> np.ndarray:
        raise NotImplementedError


class ZeroPolicy(PolicyAdapter):
    name = "zero"

    def act(self, scan, u, state, config):
        return np.zeros(3)


class EchoPolicy(PolicyAdapter):
    """Forwards the joystick directly as the linear velocity command."""

    name = "stub"

    def act(self, scan, u, state, config):
        return np.array([u.ux, u.uy, 0.0])


class RDSPolicy(PolicyAdapter):
    name = "rds"

    def __init__(self, tau: float = DEFAULT_TAU, heading_gain: float = 1.0):
        self.tau = tau
        self.heading_gain = heading_gain

    def act(self, scan, u, state, config):
        constraints = build_constraints(scan, config.capsule, self.tau)
        cmd = solve_rds(u, constraints, config.v_max_lin, config.omega_max, self.heading_gain)
        return np.array(
            [cmd.vx / config.v_max_lin, cmd.vy / config.v_max_lin, cmd.omega / config.omega_max]
        )


class CheckpointPolicy(PolicyAdapter):
    """Evaluation of a trained policy: the action mean by default, or a
    seeded Gaussian sample around it when ``stochastic`` is set."""

    def __init__(self, path, stochastic: bool = False, seed: int = 0):
        import torch  # local: keep torch out of rds-only workflows

        from .nets import load_checkpoint

        self._torch = torch
        self.policy, self.meta = load_checkpoint(path)
        self.policy.eval()
        self.name = f"{self.policy.spec.name}@{self.meta.get('epoch', '?')}"
        self.n_rays = self.policy.spec.n_rays
        self.stochastic = stochastic
        self._seed = seed
        self._state = None
        self._rng = np.random.default_rng(seed)

    def reset(self) -> None:
        self._state = self.policy.initial_state(1)
        self._rng = np.random.default_rng(self._seed)

    def act(self, scan, u, state, config):
        if self._state is None and self.policy.spec.lstm is not None:
            self.reset()
        obs = assemble_observation(
            scan, u, state.measured_velocity, state.last_action, state.second_last_action,
            config.v_max_lin, config.omega_max,
        )
        with self._torch.no_grad():
            mu, _, self._state = self.policy(
                self._torch.from_numpy(obs).unsqueeze(0), self._state
            )
        action = mu.squeeze(0).numpy().astype(np.float64)
        if self.stochastic:
            std = np.exp(self.policy.clamped_log_std().detach().numpy())
            action = action + std * self._rng.standard_normal(3)
        return np.clip(action, -1.0, 1.0)


def make_policy_adapter(spec: str, **kwargs) -> PolicyAdapter:
    """Resolve "rds", "stub", "zero", or a checkpoint path."""
    key = spec.strip().lower()
    if key == "rds":
        return RDSPolicy(**kwargs)
    if key in ("stub", "echo"):
        return EchoPolicy()
    if key == "zero":
        return ZeroPolicy()
    return CheckpointPolicy(spec)
