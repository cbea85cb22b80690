"""Realtime teleoperation service: one simulation session per websocket
client, stepping at the training control rate and broadcasting frames at
half that rate. Inputs and frames are both latest-wins: stale joystick
messages are overwritten, late frames are dropped rather than queued.
"""

from __future__ import annotations

import asyncio
import math
import time
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .envs import EnvConfig, EnvKind, EpisodeState, build_world
from .geometry import (
    CollisionCapsule,
    LidarSpec,
    Pose2D,
    Vec2,
    VelocityCommand,
    WorldSpec,
    classify_proximity,
    integrate_kinematics,
    load_world,
    point_clearance,
    raycast,
    world_to_dict,
)
from .obs import scale_action
from .policies import PolicyAdapter, make_policy_adapter
from .user import clamp_manual_input

TRAIL_TAIL_POINTS = 50
MAX_LIDAR_WIRE = 90


def _builtin_world(name: str, rng: np.random.Generator) -> WorldSpec:
    kinds = {"a": EnvKind.EMPTY, "b": EnvKind.CYLINDER, "c": EnvKind.BOX, "d": EnvKind.DOOR}
    if name in kinds:
        return build_world(kinds[name], EnvConfig(kinds[name]), rng)
    if name == "rooms":
        with resources.as_file(
            resources.files("holoshare") / "worlds" / "manual_rooms.yaml"
        ) as path:
            return load_world(path)
    return load_world(name)


@dataclass
class ServeSettings:
    policies: dict[str, PolicyAdapter]
    default_policy: str
    world_names: list[str]
    default_world: str
    seed: int = 0
    tick_hz: float = 40.0
    broadcast_every: int = 2
    v_max_lin: float = 0.67
    omega_max: float = 2.0
    lidar: LidarSpec = LidarSpec(n_rays=360)
    capsule: CollisionCapsule = field(default_factory=CollisionCapsule)
    ui_dir: Path | None = None

    @classmethod
    def build(
        cls,
        policy_specs: list[str],
        world: str = "rooms",
        seed: int = 0,
        v_max_lin: float = 0.67,
        omega_max: float = 2.0,
        ui_dir: str | None = None,
        tick_hz: float = 40.0,
    ) -> "ServeSettings":
        policies: dict[str, PolicyAdapter] = {}
        for spec in policy_specs:
            name, _, path = spec.partition("=")
            adapter = make_policy_adapter(path or name)
            policies[name if path else adapter.name] = adapter
        world_names = ["a", "b", "c", "d", "rooms"]
        if world not in world_names:
            world_names.append(world)
        resolved_ui = Path(ui_dir) if ui_dir else Path("frontend/dist")
        return cls(
            policies=policies,
            default_policy=next(iter(policies)),
            world_names=world_names,
            default_world=world,
            seed=seed,
            tick_hz=tick_hz,
            v_max_lin=v_max_lin,
            omega_max=omega_max,
            ui_dir=resolved_ui if resolved_ui.is_dir() else None,
        )


class TeleopSession:
    """Simulation state for one connected client."""

    def __init__(self, settings: ServeSettings, session_seed: int):
        self.settings = settings
        self.rng = np.random.default_rng(session_seed)
        self.policy_name = settings.default_policy
        self.world_name = settings.default_world
        self.tick = 0  # frame counter, strictly increasing
        self.sim_time = 0.0
        self.paused = False
        self.latest_input = (0.0, 0.0)
        self.trail: deque = deque(maxlen=2000)
        self.config = EnvConfig(
            EnvKind.EMPTY,
            lidar=settings.lidar,
            capsule=settings.capsule,
            v_max_lin=settings.v_max_lin,
            omega_max=settings.omega_max,
        )
        self.reset()

    @property
    def adapter(self) -> PolicyAdapter:
        return self.settings.policies[self.policy_name]

    def reset(self) -> None:
        self.world = _builtin_world(self.world_name, self.rng)
        clearance = self.settings.capsule.max_reach + 0.05
        h = self.world.arena_half_extent - 1.0
        for _ in range(1000):
            pose = Pose2D(
                Vec2(*self.rng.uniform(-h, h, size=2)),
                float(self.rng.uniform(-math.pi, math.pi)),
            )
            if point_clearance(self.world, pose.position) >= clearance:
                break
        else:
            raise RuntimeError("could not place the robot in the chosen world")
        self.state = EpisodeState(
            pose=pose,
            target=Vec2(0.0, 0.0),  # unused: intent comes from the client
            measured_velocity=VelocityCommand(0, 0, 0),
            last_action=np.zeros(3),
            second_last_action=np.zeros(3),
            step_count=0,
            world=self.world,
        )
        self.scan = raycast(self.world, pose, self.settings.lidar)
        self.zones = classify_proximity(self.scan, self.settings.capsule)
        self.trail.clear()
        self.trail.append((pose.position.x, pose.position.y))
        self.adapter.reset()

    def select_policy(self, name: str) -> bool:
        if name not in self.settings.policies:
            return False
        self.policy_name = name
        self.adapter.reset()
        return True

    def select_world(self, name: str) -> bool:
        if name not in self.settings.world_names and not Path(name).is_file():
            return False
        self.world_name = name
        self.reset()
        return True

    def step(self) -> None:
        if self.paused:
            return
        cfg = self.config
        u = clamp_manual_input(*self.latest_input)
        action = np.clip(self.adapter.act(self.scan, u, self.state, cfg), -1.0, 1.0)
        cmd = scale_action(action, cfg.v_max_lin, cfg.omega_max)
        pose = integrate_kinematics(self.state.pose, cmd, cfg.dt)
        self.scan = raycast(self.world, pose, self.settings.lidar)
        self.zones = classify_proximity(self.scan, self.settings.capsule)
        self.state = EpisodeState(
            pose=pose,
            target=self.state.target,
            measured_velocity=cmd,
            last_action=action,
            second_last_action=self.state.last_action,
            step_count=self.state.step_count + 1,
            world=self.world,
        )
        self.sim_time += cfg.dt
        self.trail.append((pose.position.x, pose.position.y))
        self._last_u = u
        self._last_cmd = cmd

    def world_message(self) -> dict:
        cap = self.settings.capsule
        return {
            "type": "world",
            "world": world_to_dict(self.world),
            "capsule": {
                "radius_col": cap.radius_col,
                "radius_crit": cap.radius_crit,
                "segment_half_length": cap.segment_half_length,
            },
            "policies": sorted(self.settings.policies),
            "worlds": self.settings.world_names,
            "active_policy": self.policy_name,
            "active_world": self.world_name,
            "v_max_lin": self.settings.v_max_lin,
            "omega_max": self.settings.omega_max,
            "lidar": {
                "n_rays": self.settings.lidar.n_rays,
                "max_range": self.settings.lidar.max_range,
            },
        }

    def frame(self) -> dict:
        self.tick += 1
        n = self.settings.lidar.n_rays
        stride = max(1, math.ceil(n / MAX_LIDAR_WIRE))
        pose = self.state.pose
        cmd = getattr(self, "_last_cmd", VelocityCommand(0, 0, 0))
        u = getattr(self, "_last_u", clamp_manual_input(0, 0))
        tail = list(self.trail)[-TRAIL_TAIL_POINTS:]
        return {
            "type": "frame",
            "tick": self.tick,
            "sim_time": round(self.sim_time, 6),
            "paused": self.paused,
            "pose": {"x": pose.position.x, "y": pose.position.y, "yaw": pose.yaw},
            "cmd": {"vx": cmd.vx, "vy": cmd.vy, "omega": cmd.omega},
            "input": {"ux": u.ux, "uy": u.uy},
            "lidar": [round(float(r), 4) for r in self.scan.ranges[::stride]],
            "zones": [int(z) for z in self.zones[::stride]],
            "zone_worst": int(self.zones.max()) if len(self.zones) else 0,
            "trail": [[round(x, 4), round(y, 4)] for x, y in tail],
            "policy": self.policy_name,
            "world": self.world_name,
        }


async def _session_loop(ws: WebSocket, settings: ServeSettings, session_seed: int) -> None:
    session = TeleopSession(settings, session_seed)
    await ws.send_json(session.world_message())

    frame_slot: asyncio.Queue = asyncio.Queue(maxsize=1)

    def publish(message: dict) -> None:
        # latest-wins: drop the stale frame instead of queueing
        if frame_slot.full():
            try:
                frame_slot.get_nowait()
            except asyncio.QueueEmpty:
                pass
        frame_slot.put_nowait(message)

    async def receiver() -> None:
        while True:
            msg = await ws.receive_json()
            kind = msg.get("type")
            if kind == "input":
                try:
                    session.latest_input = (float(msg.get("ux", 0)), float(msg.get("uy", 0)))
                except (TypeError, ValueError):
                    continue
            elif kind == "reset":
                session.reset()
                publish(session.world_message())
            elif kind == "select_world":
                if session.select_world(str(msg.get("name", ""))):
                    publish(session.world_message())
                else:
                    publish({"type": "error", "message": f"unknown world {msg.get('name')!r}"})
            elif kind == "select_policy":
                if not session.select_policy(str(msg.get("name", ""))):
                    publish({"type": "error", "message": f"unknown policy {msg.get('name')!r}"})
            elif kind == "pause":
                session.paused = bool(msg.get("value", True))

    async def simulator() -> None:
        period = 1.0 / settings.tick_hz
        next_t = time.perf_counter()
        counter = 0
        while True:
            now = time.perf_counter()
            if now < next_t:
                await asyncio.sleep(next_t - now)
            elif now - next_t > period:
                next_t = now  # fell behind: drop simulated time, never burst
            session.step()
            counter += 1
            if counter % settings.broadcast_every == 0:
                publish(session.frame())
            next_t += period
            await asyncio.sleep(0)

    async def sender() -> None:
        while True:
            message = await frame_slot.get()
            await ws.send_json(message)

    tasks = [
        asyncio.create_task(receiver()),
        asyncio.create_task(simulator()),
        asyncio.create_task(sender()),
    ]
    try:
        done, pending = await asyncio.wait(tasks, return_when=asyncio.FIRST_EXCEPTION)
        for task in done:
            exc = task.exception()
            if exc is not None and not isinstance(exc, WebSocketDisconnect):
                raise exc
    finally:
        for task in tasks:
            task.cancel()


_PLACEHOLDER = """<!doctype html>
<html><head><title>holoshare teleop</title></head>
<body style="font-family: sans-serif">
<h2>holoshare teleop service</h2>
<p>The websocket endpoint is at <code>/teleop</code>.</p>
<p>No UI bundle found. Build the frontend (<code>npm run build</code> in
<code>frontend/</code>) and restart with <code>--ui-dir frontend/dist</code>.</p>
</body></html>"""


def make_app(settings: ServeSettings) -> FastAPI:
    app = FastAPI(title="holoshare teleop")
    app.state.settings = settings
    session_counter = {"n": 0}

    if settings.ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/static", StaticFiles(directory=settings.ui_dir), name="static")

        @app.get("/")
        async def index():
            from fastapi.responses import FileResponse

            return FileResponse(settings.ui_dir / "index.html")

    else:

        @app.get("/")
        async def index():
            from fastapi.responses import HTMLResponse

            return HTMLResponse(_PLACEHOLDER)

    @app.websocket("/teleop")
    async def teleop(ws: WebSocket):
        await ws.accept()
        session_counter["n"] += 1
        seed = settings.seed + session_counter["n"]
        try:
            await _session_loop(ws, settings, seed)
        except WebSocketDisconnect:
            pass

    return app
