"""Benchmark scenarios, heading/jerk metrics, trajectory logs, and report
emission (delimited tables plus figures rendered by the plots module).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .envs import DoneReason, EnvConfig, EnvKind, EpisodeState, step_episode
from .geometry import (
    AxisBox,
    LidarSpec,
    Pose2D,
    Vec2,
    VelocityCommand,
    WorldSpec,
    Zone,
    raycast,
)
from .policies import PolicyAdapter
from .reward import REWARD_PROFILES, RewardWeights
from .user import UserInput, simulated_input

BOX_LENGTHS = (1.0, 2.0, 4.0)
BOX_WIDTH = 1.0
DOOR_WIDTHS = (1.0, 1.25)
INCIDENT_ANGLES = (0.0, 20.0)
DOOR_WALL_THICKNESS = 0.2
EVAL_V_MAX = 0.67
EVAL_OMEGA_MAX = 2.0


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str  # "box" or "door"
    size: float  # box lateral length, or door opening width
    incident_angle_deg: float
    start_offset: float = 2.0
    target_offset: float = 2.0
    v_max_lin: float = EVAL_V_MAX
    omega_max: float = EVAL_OMEGA_MAX

    def __post_init__(self):
        if self.kind not in ("box", "door"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.kind == "box" and self.size not in BOX_LENGTHS:
            raise ValueError(f"box length must be one of {BOX_LENGTHS}")
        if self.kind == "door" and self.size not in DOOR_WIDTHS:
            raise ValueError(f"door width must be one of {DOOR_WIDTHS}")
        if self.incident_angle_deg not in INCIDENT_ANGLES:
            raise ValueError(f"incident angle must be one of {INCIDENT_ANGLES}")

    @property
    def name(self) -> str:
        return f"{self.kind}{self.size:g}_a{self.incident_angle_deg:g}"

    @property
    def obstacle_depth(self) -> float:
        return BOX_WIDTH if self.kind == "box" else DOOR_WALL_THICKNESS


def scenario_grid() -> list[ScenarioSpec]:
    """The full benchmark: 3 box lengths x 2 angles + 2 door widths x 2 angles."""
    grid = [
        ScenarioSpec("box", length, angle)
        for length in BOX_LENGTHS
        for angle in INCIDENT_ANGLES
    ]
    grid += [
        ScenarioSpec("door", width, angle)
        for width in DOOR_WIDTHS
        for angle in INCIDENT_ANGLES
    ]
    return grid


def build_scenario(spec: ScenarioSpec, arena_half_extent: float = 5.0):
    """World plus start pose and target for a scenario.

    The target sits ``target_offset`` behind the obstacle on its axis; the
    start sits at the same obstacle-center distance, rotated off-axis by the
    incident angle, facing the target.
    """
    h = arena_half_extent
    if spec.kind == "box":
        world = WorldSpec(h, [AxisBox(Vec2(0, 0), Vec2(BOX_WIDTH / 2, spec.size / 2))])
    else:
        half_t = DOOR_WALL_THICKNESS / 2
        upper_c = (spec.size / 2 + h) / 2
        upper_h = (h - spec.size / 2) / 2
        world = WorldSpec(
            h,
            [
                AxisBox(Vec2(0, upper_c), Vec2(half_t, upper_h)),
                AxisBox(Vec2(0, -upper_c), Vec2(half_t, upper_h)),
            ],
        )
    r = spec.obstacle_depth / 2 + spec.target_offset
    angle = math.radians(spec.incident_angle_deg)
    start = Vec2(-r * math.cos(angle), r * math.sin(angle))
    target = Vec2(spec.obstacle_depth / 2 + spec.target_offset, 0.0)
    yaw = math.atan2(target.y - start.y, target.x - start.x)
    return world, Pose2D(start, yaw), target


# ---------------------------------------------------------------------------
# Trajectory log

LOG_COLUMNS = [
    "t", "x", "y", "yaw",
    "cmd_vx", "cmd_vy", "cmd_omega",
    "meas_vx", "meas_vy", "meas_omega",
    "ux", "uy", "d_min", "zone",
    "r_obstacles", "r_heading", "r_tracking", "r_vy_penalty",
    "r_smoothing1", "r_smoothing2", "r_total",
]


class LogFormatError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class TrajectoryLog:
    dt: float
    data: np.ndarray  # (n_steps, len(LOG_COLUMNS))
    meta: dict

    def column(self, name: str) -> np.ndarray:
        return self.data[:, LOG_COLUMNS.index(name)]

    def __len__(self) -> int:
        return self.data.shape[0]

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            for key, value in sorted(self.meta.items()):
                fh.write(f"# {key}={value}\n")
            fh.write(f"# dt={self.dt!r}\n")
            fh.write(",".join(LOG_COLUMNS) + "\n")
            for row in self.data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load_csv(cls, path) -> "TrajectoryLog":
        meta: dict = {}
        rows = []
        header_seen = False
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    meta[key.strip()] = value.strip()
                    continue
                if not header_seen:
                    if line.split(",") != LOG_COLUMNS:
                        raise LogFormatError("unexpected header columns", lineno)
                    header_seen = True
                    continue
                parts = line.split(",")
                if len(parts) != len(LOG_COLUMNS):
                    raise LogFormatError(
                        f"expected {len(LOG_COLUMNS)} fields, got {len(parts)}", lineno
                    )
                try:
                    rows.append([float(p) for p in parts])
                except ValueError:
                    raise LogFormatError("non-numeric field", lineno) from None
        if not header_seen:
            raise LogFormatError("missing header line", 1)
        if "dt" not in meta:
            raise LogFormatError("missing dt metadata", 1)
        dt = float(meta.pop("dt"))
        data = np.array(rows, dtype=np.float64).reshape(-1, len(LOG_COLUMNS))
        log = cls(dt=dt, data=data, meta=meta)
        log.validate()
        return log

    def validate(self) -> None:
        """Monotone time with a fixed step between records."""
        t = self.column("t")
        if len(t) >= 2:
            deltas = np.diff(t)
            if np.any(deltas <= 0):
                bad = int(np.argmax(deltas <= 0))
                raise LogFormatError("non-monotone time", bad + 2)
            if np.any(np.abs(deltas - self.dt) > 1e-9):
                bad = int(np.argmax(np.abs(deltas - self.dt) > 1e-9))
                raise LogFormatError("non-uniform dt", bad + 2)


# ---------------------------------------------------------------------------
# Metrics


def heading_metric(u: UserInput) -> float:
    """Heading angle between the platform's facing and the intent direction.

    Undefined for an idle joystick; callers skip those records.
    """
    if u.norm <= 0.0:
        raise ValueError("heading undefined for zero user input")
    return abs(math.atan2(u.uy, u.ux))


def heading_series(log: TrajectoryLog) -> np.ndarray:
    ux, uy = log.column("ux"), log.column("uy")
    norms = np.hypot(ux, uy)
    keep = norms > 0.0
    return np.abs(np.arctan2(uy[keep], ux[keep]))


def jerk_metric(log: TrajectoryLog) -> np.ndarray:
    """Jerk magnitude of the commanded velocity at interior samples:
    second-order central difference of (vx, vy, omega) divided by dt^2,
    combined as the Euclidean norm."""
    if len(log) < 3:
        return np.empty(0)
    vel = np.stack(
        [log.column("cmd_vx"), log.column("cmd_vy"), log.column("cmd_omega")], axis=1
    )
    second = (vel[2:] - 2.0 * vel[1:-1] + vel[:-2]) / log.dt**2
    return np.linalg.norm(second, axis=1)


def _quartiles(series: np.ndarray) -> tuple[float, float, float]:
    if series.size == 0:
        return (math.nan, math.nan, math.nan)
    q1, q2, q3 = np.percentile(series, [25, 50, 75])
    return (float(q1), float(q2), float(q3))


@dataclass
class MetricsReport:
    scenario: str
    policy: str
    success: bool
    done_reason: str
    duration: float
    path_length: float
    heading: np.ndarray
    heading_quartiles: tuple[float, float, float]
    jerk: np.ndarray
    jerk_quartiles: tuple[float, float, float]


def compute_report(log: TrajectoryLog) -> MetricsReport:
    heading = heading_series(log)
    jerk = jerk_metric(log)
    xy = np.stack([log.column("x"), log.column("y")], axis=1)
    path_length = float(np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1)))
    return MetricsReport(
        scenario=log.meta.get("scenario", "?"),
        policy=log.meta.get("policy", "?"),
        success=log.meta.get("success", "false") == "true",
        done_reason=log.meta.get("done_reason", "?"),
        duration=float(log.column("t")[-1]) if len(log) else 0.0,
        path_length=path_length,
        heading=heading,
        heading_quartiles=_quartiles(heading),
        jerk=jerk,
        jerk_quartiles=_quartiles(jerk),
    )


# ---------------------------------------------------------------------------
# Scenario runner


def run_scenario(
    spec: ScenarioSpec,
    adapter: PolicyAdapter,
    seed: int = 0,
    weights: RewardWeights = REWARD_PROFILES["R1"],
    max_steps: int = 1200,
    n_rays: int | None = None,
) -> tuple[TrajectoryLog, MetricsReport]:
    """Run one benchmark scenario with the simulated user model.

    Success means the target was reached without ever entering the
    collision zone. The scan resolution follows the adapter's requirement
    (falling back to 360 rays).
    """
    rays = n_rays or adapter.n_rays or 360
    config = EnvConfig(
        kind=EnvKind.BOX if spec.kind == "box" else EnvKind.DOOR,
        lidar=LidarSpec(n_rays=rays),
        v_max_lin=spec.v_max_lin,
        omega_max=spec.omega_max,
        max_steps=max_steps,
    )
    world, pose, target = build_scenario(spec)
    state = EpisodeState(
        pose=pose,
        target=target,
        measured_velocity=VelocityCommand(0, 0, 0),
        last_action=np.zeros(3),
        second_last_action=np.zeros(3),
        step_count=0,
        world=world,
    )
    adapter.reset()

    rows = []
    collided = False
    reason = DoneReason.TIMEOUT
    scan = raycast(world, state.pose, config.lidar)
    for step in range(max_steps):
        u = simulated_input(state.pose, state.target)
        action = adapter.act(scan, u, state, config)
        state, result = step_episode(state, action, config, weights)
        scan = result.scan
        cmd = state.measured_velocity
        bd = result.reward
        rows.append([
            (step + 1) * config.dt,
            state.pose.position.x, state.pose.position.y, state.pose.yaw,
            cmd.vx, cmd.vy, cmd.omega,
            cmd.vx, cmd.vy, cmd.omega,
            u.ux, u.uy,
            float(np.min(scan.ranges)), float(np.max(result.zones)),
            bd.obstacles, bd.heading, bd.tracking, bd.vy_penalty,
            bd.smoothing_1, bd.smoothing_2, bd.total,
        ])
        if np.any(result.zones == Zone.COLLISION):
            collided = True
        if result.done:
            reason = result.done_reason
            break

    success = reason is DoneReason.GOAL_REACHED and not collided
    log = TrajectoryLog(
        dt=config.dt,
        data=np.array(rows, dtype=np.float64).reshape(-1, len(LOG_COLUMNS)),
        meta={
            "scenario": spec.name,
            "policy": adapter.name,
            "seed": seed,
            "success": "true" if success else "false",
            "done_reason": reason.value,
            "n_rays": rays,
        },
    )
    return log, compute_report(log)


def run_env_episodes(
    adapter: PolicyAdapter,
    kind: EnvKind,
    n_episodes: int,
    seed: int = 0,
    v_max_lin: float = 1.0,
    omega_max: float = 1.0,
    max_steps: int = 1200,
    weights: RewardWeights = REWARD_PROFILES["R1"],
) -> dict:
    """Held-out evaluation on a training environment kind: fresh randomized
    episodes driven by the simulated user model. Returns outcome counts."""
    from .envs import reset_episode

    rays = adapter.n_rays or 360
    config = EnvConfig(
        kind,
        lidar=LidarSpec(n_rays=rays),
        v_max_lin=v_max_lin,
        omega_max=omega_max,
        max_steps=max_steps,
    )
    rng = np.random.default_rng(seed)
    counts = {r.value: 0 for r in DoneReason if r is not DoneReason.RUNNING}
    for _ in range(n_episodes):
        state = reset_episode(config, rng)
        adapter.reset()
        scan = raycast(state.world, state.pose, config.lidar)
        reason = DoneReason.TIMEOUT
        for _ in range(max_steps):
            u = simulated_input(state.pose, state.target)
            action = adapter.act(scan, u, state, config)
            state, result = step_episode(state, action, config, weights)
            scan = result.scan
            if result.done:
                reason = result.done_reason
                break
        counts[reason.value] += 1
    counts["episodes"] = n_episodes
    counts["collision_rate"] = counts[DoneReason.COLLISION.value] / n_episodes
    counts["goal_rate"] = counts[DoneReason.GOAL_REACHED.value] / n_episodes
    return counts


# ---------------------------------------------------------------------------
# Report emission


def emit_report(
    reports: list[MetricsReport],
    out_dir,
    logs: list[TrajectoryLog] | None = None,
    figures: bool = True,
) -> Path:
    """Write the summary table, the per-policy success matrix, raw metric
    series, and (optionally) the rendered figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "summary.csv", "w") as fh:
        fh.write(
            "scenario,policy,success,done_reason,duration_s,path_length_m,"
            "heading_q1,heading_median,heading_q3,jerk_q1,jerk_median,jerk_q3\n"
        )
        for r in reports:
            hq, jq = r.heading_quartiles, r.jerk_quartiles
            fh.write(
                f"{r.scenario},{r.policy},{str(r.success).lower()},{r.done_reason},"
                f"{r.duration:.3f},{r.path_length:.4f},"
                f"{hq[0]:.6f},{hq[1]:.6f},{hq[2]:.6f},"
                f"{jq[0]:.6f},{jq[1]:.6f},{jq[2]:.6f}\n"
            )

    scenarios = sorted({r.scenario for r in reports})
    policies = sorted({r.policy for r in reports})
    outcome = {(r.scenario, r.policy): r.success for r in reports}
    with open(out / "success_matrix.csv", "w") as fh:
        fh.write("scenario," + ",".join(policies) + "\n")
        for scenario in scenarios:
            cells = [
                str(outcome.get((scenario, p), "")).lower() for p in policies
            ]
            fh.write(scenario + "," + ",".join(cells) + "\n")

    for r in reports:
        stem = f"{r.scenario}__{r.policy.replace('/', '_')}"
        np.savetxt(
            out / f"{stem}__heading.csv",
            np.column_stack([np.arange(len(r.heading)), r.heading]),
            delimiter=",", header="index,heading_rad", comments="",
        )
        np.savetxt(
            out / f"{stem}__jerk.csv",
            np.column_stack([np.arange(len(r.jerk)), r.jerk]),
            delimiter=",", header="index,jerk", comments="",
        )

    if logs:
        for log in logs:
            stem = f"{log.meta['scenario']}__{str(log.meta['policy']).replace('/', '_')}"
            log.save_csv(out / f"{stem}__trajectory.csv")

    if figures:
        from . import plots

        plots.metric_boxplots(reports, out / "heading_boxplot.png", metric="heading")
        plots.metric_boxplots(reports, out / "jerk_boxplot.png", metric="jerk")
        if logs:
            for log in logs:
                stem = f"{log.meta['scenario']}__{str(log.meta['policy']).replace('/', '_')}"
                plots.trajectory_figure(log, out / f"{stem}__trajectory.png")
    return out
