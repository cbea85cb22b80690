"""Training environments: randomized reset rules for the four world kinds,
the 40 Hz episode step loop, termination handling, the curriculum schedule,
and a batch wrapper for vectorized rollout collection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .geometry import (
    AxisBox,
    Circle,
    CollisionCapsule,
    LidarScan,
    LidarSpec,
    Pose2D,
    Vec2,
    VelocityCommand,
    WorldSpec,
    Zone,
    classify_proximity,
    integrate_kinematics,
    point_clearance,
    raycast,
)
from .obs import assemble_observation, scale_action
from .reward import RewardBreakdown, RewardWeights, total_reward
from .user import UserInput, simulated_input


class ResetError(RuntimeError):
    """Rejection sampling failed; the environment config is inconsistent."""


class EnvKind(Enum):
    EMPTY = "a"
    CYLINDER = "b"
    BOX = "c"
    DOOR = "d"


KIND_ORDER = [EnvKind.EMPTY, EnvKind.CYLINDER, EnvKind.BOX, EnvKind.DOOR]

_KIND_NAMES = {
    "a": EnvKind.EMPTY, "empty": EnvKind.EMPTY,
    "b": EnvKind.CYLINDER, "cylinder": EnvKind.CYLINDER,
    "c": EnvKind.BOX, "box": EnvKind.BOX,
    "d": EnvKind.DOOR, "door": EnvKind.DOOR,
}


def parse_env_set(text: str) -> list[EnvKind]:
    """Parse an environment set like "a,b,c" or "abcd" or "empty,door"."""
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) == 1 and all(ch in "abcd" for ch in parts[0]):
        parts = list(parts[0])
    kinds = []
    for part in parts:
        try:
            kind = _KIND_NAMES[part.lower()]
        except KeyError:
            raise ValueError(f"unknown environment {part!r} (use a/b/c/d or names)") from None
        if kind not in kinds:
            kinds.append(kind)
    if not kinds:
        raise ValueError("empty environment set")
    return sorted(kinds, key=KIND_ORDER.index)


# Four asymmetric fixed cylinders (radius 0.4 m) of the cylinder environment.
CYLINDER_LAYOUT = [(1.5, 1.0), (-2.0, 1.8), (-1.2, -2.2), (2.3, -1.5)]
CYLINDER_RADIUS = 0.4
DOOR_WALL_THICKNESS = 0.2


@dataclass(frozen=True)
class EnvConfig:
    kind: EnvKind
    lidar: LidarSpec = LidarSpec(n_rays=36)
    capsule: CollisionCapsule = CollisionCapsule()
    v_max_lin: float = 1.0
    omega_max: float = 1.0
    dt: float = 1.0 / 40.0
    max_steps: int = 1200
    goal_radius: float = 0.3
    arena_half_extent: float = 5.0
    # reset randomization ranges
    box_length_range: tuple[float, float] = (1.0, 4.0)
    box_breadth_range: tuple[float, float] = (1.0, 2.0)
    door_width_range: tuple[float, float] = (0.9, 1.75)

    def __post_init__(self):
        if self.dt <= 0 or self.max_steps <= 0 or self.goal_radius <= 0:
            raise ValueError("dt, max_steps and goal_radius must be positive")
        for lo, hi in (self.box_length_range, self.box_breadth_range, self.door_width_range):
            if not (0 < lo <= hi):
                raise ValueError("randomization ranges must satisfy 0 < lo <= hi")


@dataclass
class EpisodeState:
    pose: Pose2D
    target: Vec2  # fictional: drives the simulated input, never observed
    measured_velocity: VelocityCommand
    last_action: np.ndarray
    second_last_action: np.ndarray
    step_count: int
    world: WorldSpec


class DoneReason(Enum):
    RUNNING = "running"
    COLLISION = "collision"
    GOAL_REACHED = "goal_reached"
    TIMEOUT = "timeout"


@dataclass
class StepResult:
    observation: np.ndarray
    reward: RewardBreakdown
    done: bool
    done_reason: DoneReason
    phi: float
    user: UserInput
    scan: LidarScan
    zones: np.ndarray

    def __post_init__(self):
        assert self.done == (self.done_reason is not DoneReason.RUNNING)


# ---------------------------------------------------------------------------
# World construction and reset sampling


def build_world(kind: EnvKind, config: EnvConfig, rng: np.random.Generator) -> WorldSpec:
    h = config.arena_half_extent
    if kind is EnvKind.EMPTY:
        return WorldSpec(h, [])
    if kind is EnvKind.CYLINDER:
        return WorldSpec(
            h, [Circle(Vec2(x, y), CYLINDER_RADIUS) for x, y in CYLINDER_LAYOUT]
        )
    if kind is EnvKind.BOX:
        length = float(rng.uniform(*config.box_length_range))  # lateral extent to go around
        breadth = float(rng.uniform(*config.box_breadth_range))  # depth along the approach
        return WorldSpec(h, [AxisBox(Vec2(0.0, 0.0), Vec2(breadth / 2, length / 2))])
    if kind is EnvKind.DOOR:
        width = float(rng.uniform(*config.door_width_range))
        half_t = DOOR_WALL_THICKNESS / 2
        upper_c = (width / 2 + h) / 2
        upper_h = (h - width / 2) / 2
        return WorldSpec(
            h,
            [
                AxisBox(Vec2(0.0, upper_c), Vec2(half_t, upper_h)),
                AxisBox(Vec2(0.0, -upper_c), Vec2(half_t, upper_h)),
            ],
        )
    raise ValueError(f"unhandled kind {kind}")


def _sample_clear_point(
    world: WorldSpec, rng: np.random.Generator, lo, hi, clearance: float, tries: int = 1000
) -> Vec2:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    for _ in range(tries):
        p = Vec2(*(lo + (hi - lo) * rng.uniform(size=2)))
        if point_clearance(world, p) >= clearance:
            return p
    raise ResetError("rejection sampling failed; check obstacle layout vs clearance")


def reset_episode(config: EnvConfig, rng: np.random.Generator) -> EpisodeState:
    """Sample a fresh episode. Start pose and target are always clear of the
    critical zone regardless of orientation."""
    h = config.arena_half_extent
    clearance = config.capsule.max_reach + 1e-6
    margin = 1.0  # keep spawns at least 1 m off the walls
    world = build_world(config.kind, config, rng)

    if config.kind in (EnvKind.EMPTY, EnvKind.CYLINDER):
        lo, hi = (-(h - margin),) * 2, (h - margin,) * 2
        for _ in range(1000):
            start = _sample_clear_point(world, rng, lo, hi, clearance)
            target = _sample_clear_point(world, rng, lo, hi, clearance)
            if start.distance_to(target) > 2 * config.goal_radius:
                break
        else:
            raise ResetError("could not separate start from target")
    elif config.kind is EnvKind.BOX:
        box = world.obstacles[0]
        assert isinstance(box, AxisBox)
        half_b, half_l = box.half_extents.x, box.half_extents.y
        side = 1.0 if rng.uniform() < 0.5 else -1.0
        sx = -side * float(rng.uniform(half_b + 1.0, half_b + 3.0))
        sy = float(rng.uniform(-half_l, half_l))
        tx = side * float(rng.uniform(half_b + 1.0, half_b + 3.0))
        ty = float(rng.uniform(-half_l, half_l))
        start, target = Vec2(sx, sy), Vec2(tx, ty)
    elif config.kind is EnvKind.DOOR:
        side = 1.0 if rng.uniform() < 0.5 else -1.0
        sx = -side * float(rng.uniform(1.0, h - margin))
        sy = float(rng.uniform(-(h - margin), h - margin))
        tx = side * float(rng.uniform(1.0, h - margin))
        ty = -math.copysign(1.0, sy) * float(rng.uniform(0.0, h - margin))
        start, target = Vec2(sx, sy), Vec2(tx, ty)
    else:
        raise ValueError(f"unhandled kind {config.kind}")

    yaw = float(rng.uniform(-math.pi, math.pi))
    return EpisodeState(
        pose=Pose2D(start, yaw),
        target=target,
        measured_velocity=VelocityCommand(0.0, 0.0, 0.0),
        last_action=np.zeros(3),
        second_last_action=np.zeros(3),
        step_count=0,
        world=world,
    )


def observe(state: EpisodeState, config: EnvConfig) -> tuple[np.ndarray, LidarScan, UserInput]:
    """Observation vector plus the scan and simulated input it was built from."""
    scan = raycast(state.world, state.pose, config.lidar)
    u = simulated_input(state.pose, state.target)
    vec = assemble_observation(
        scan, u, state.measured_velocity, state.last_action, state.second_last_action,
        config.v_max_lin, config.omega_max,
    )
    return vec, scan, u


def step_episode(
    state: EpisodeState,
    action: np.ndarray,
    config: EnvConfig,
    weights: RewardWeights,
) -> tuple[EpisodeState, StepResult]:
    """Advance one control step.

    The tracking reward compares the action against the input the agent
    acted on (pre-step); the heading penalty uses the post-step input so a
    turn toward the intent is credited immediately; obstacle terms and
    termination use the post-step scan.
    """
    action = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
    u_prev = simulated_input(state.pose, state.target)
    cmd = scale_action(action, config.v_max_lin, config.omega_max)
    pose = integrate_kinematics(state.pose, cmd, config.dt)

    scan = raycast(state.world, pose, config.lidar)
    zones = classify_proximity(scan, config.capsule)
    u_new = simulated_input(pose, state.target)
    phi = abs(math.atan2(u_new.uy, u_new.ux)) if u_new.norm > 1e-12 else 0.0

    breakdown = total_reward(
        scan, config.capsule, action, state.last_action, state.second_last_action,
        u_prev, phi, weights,
    )

    new_state = EpisodeState(
        pose=pose,
        target=state.target,
        measured_velocity=cmd,
        last_action=action,
        second_last_action=state.last_action,
        step_count=state.step_count + 1,
        world=state.world,
    )

    if (zones == Zone.COLLISION).any():
        reason = DoneReason.COLLISION
    elif pose.position.distance_to(state.target) < config.goal_radius:
        reason = DoneReason.GOAL_REACHED
    elif new_state.step_count >= config.max_steps:
        reason = DoneReason.TIMEOUT
    else:
        reason = DoneReason.RUNNING

    observation = assemble_observation(
        scan, u_new, new_state.measured_velocity, new_state.last_action,
        new_state.second_last_action, config.v_max_lin, config.omega_max,
    )
    result = StepResult(
        observation=observation,
        reward=breakdown,
        done=reason is not DoneReason.RUNNING,
        done_reason=reason,
        phi=phi,
        user=u_new,
        scan=scan,
        zones=zones,
    )
    return new_state, result


# ---------------------------------------------------------------------------
# Curriculum

CURRICULUM_STAGE1_EPOCHS = 50


def curriculum_schedule(epoch: int, env_set: list[EnvKind]) -> dict[EnvKind, float]:
    """Stage 1 trains intent tracking in empty space; afterwards the
    configured set is weighted evenly."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if epoch < CURRICULUM_STAGE1_EPOCHS:
        return {EnvKind.EMPTY: 1.0}
    share = 1.0 / len(env_set)
    return {kind: share for kind in env_set}


def assign_env_kinds(distribution: dict[EnvKind, float], n_envs: int) -> list[EnvKind]:
    """Deterministic per-environment kind assignment matching the
    distribution as closely as integer counts allow."""
    kinds = sorted(distribution, key=KIND_ORDER.index)
    counts = {k: int(distribution[k] * n_envs) for k in kinds}
    short = n_envs - sum(counts.values())
    for kind in kinds[:short]:
        counts[kind] += 1
    out: list[EnvKind] = []
    for kind in kinds:
        out.extend([kind] * counts[kind])
    return out


# ---------------------------------------------------------------------------
# Single-env wrapper and vectorized batch


class SharedControlEnv:
    """Owns one episode stream: reset() -> observation, step() -> StepResult."""

    def __init__(self, config: EnvConfig, weights: RewardWeights, rng: np.random.Generator):
        self.config = config
        self.weights = weights
        self.rng = rng
        self.state: EpisodeState | None = None

    def reset(self) -> np.ndarray:
        self.state = reset_episode(self.config, self.rng)
        vec, _, _ = observe(self.state, self.config)
        return vec

    def step(self, action: np.ndarray) -> StepResult:
        if self.state is None:
            raise RuntimeError("step() before reset()")
        self.state, result = step_episode(self.state, action, self.config, self.weights)
        return result


@dataclass
class EpisodeStats:
    """Counts of finished episodes per epoch, for the metrics log."""

    ended: int = 0
    collisions: int = 0
    goals: int = 0
    timeouts: int = 0

    def record(self, reason: DoneReason) -> None:
        self.ended += 1
        if reason is DoneReason.COLLISION:
            self.collisions += 1
        elif reason is DoneReason.GOAL_REACHED:
            self.goals += 1
        elif reason is DoneReason.TIMEOUT:
            self.timeouts += 1


class EnvBatch:
    """A batch of independent environments stepped together.

    Auto-resets finished episodes and returns the first observation of the
    new episode in their slot, which is the convention the rollout buffer
    and the recurrent-state zeroing rely on.
    """

    def __init__(self, configs: list[EnvConfig], weights: RewardWeights, seed: int):
        self.weights = weights
        seq = np.random.SeedSequence(seed)
        self.envs = [
            SharedControlEnv(cfg, weights, np.random.default_rng(child))
            for cfg, child in zip(configs, seq.spawn(len(configs)))
        ]
        self.obs_dim = configs[0].lidar.n_rays + 11
        self.stats = EpisodeStats()

    def __len__(self) -> int:
        return len(self.envs)

    @property
    def configs(self) -> list[EnvConfig]:
        return [env.config for env in self.envs]

    def reset_all(self) -> np.ndarray:
        return np.stack([env.reset() for env in self.envs]).astype(np.float32)

    def step(self, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
        n = len(self.envs)
        obs = np.empty((n, self.obs_dim), dtype=np.float32)
        rewards = np.empty(n, dtype=np.float64)
        dones = np.zeros(n, dtype=bool)
        phis = np.empty(n, dtype=np.float64)
        tracking = np.empty(n, dtype=np.float64)
        for i, env in enumerate(self.envs):
            result = env.step(actions[i])
            rewards[i] = result.reward.total
            phis[i] = result.phi
            tracking[i] = result.reward.tracking
            if result.done:
                dones[i] = True
                self.stats.record(result.done_reason)
                obs[i] = env.reset()
            else:
                obs[i] = result.observation
        return obs, rewards, dones, {"phi": phis, "tracking": tracking}

    def pop_stats(self) -> EpisodeStats:
        stats, self.stats = self.stats, EpisodeStats()
        return stats

    def get_state(self) -> list:
        return [(env.rng.bit_generator.state, env.state) for env in self.envs]

    def set_state(self, snapshot: list) -> np.ndarray:
        obs = np.empty((len(self.envs), self.obs_dim), dtype=np.float32)
        for i, (env, (rng_state, ep_state)) in enumerate(zip(self.envs, snapshot)):
            env.rng.bit_generator.state = rng_state
            env.state = ep_state
            vec, _, _ = observe(env.state, env.config)
            obs[i] = vec
        return obs


def make_env_batch(
    kinds: list[EnvKind],
    base_config: EnvConfig,
    weights: RewardWeights,
    seed: int,
) -> EnvBatch:
    configs = [replace(base_config, kind=kind) for kind in kinds]
    return EnvBatch(configs, weights, seed)
