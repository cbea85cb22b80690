"""Static 2D world model: obstacle shapes, LiDAR raycasting, the capsule
proximity model, and holonomic kinematic integration.

Conventions: world frame is x-right / y-up, yaw counter-clockwise from +x.
Body frame has +x forward and +y to the left. Ray i of a scan points at
body angle ``angle_offset + 2*pi*i/n_rays``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.remainder(angle, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    return a


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)

    def distance_to(self, other: "Vec2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Pose2D:
    """World-frame pose; yaw is normalized to (-pi, pi] at construction."""

    position: Vec2
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


@dataclass(frozen=True)
class VelocityCommand:
    """Body-frame velocity command (vx forward, vy left, omega CCW)."""

    vx: float
    vy: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.omega], dtype=np.float64)


@dataclass(frozen=True)
class Circle:
    center: Vec2
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"circle radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class AxisBox:
    center: Vec2
    half_extents: Vec2

    def __post_init__(self):
        if self.half_extents.x <= 0 or self.half_extents.y <= 0:
            raise ValueError("box half extents must be > 0 componentwise")


@dataclass(frozen=True)
class Segment:
    a: Vec2
    b: Vec2
    thickness: float = 0.0

    def __post_init__(self):
        if self.thickness < 0:
            raise ValueError("segment thickness must be >= 0")


Obstacle = Circle | AxisBox | Segment


@dataclass
class WorldSpec:
    """A square arena of half-extent ``arena_half_extent`` bounded by walls,
    containing a list of static obstacles. Walls are visible to LiDAR and
    count as obstacles for collision purposes.
    """

    arena_half_extent: float
    obstacles: list[Obstacle] = field(default_factory=list)

    def __post_init__(self):
        if self.arena_half_extent <= 0:
            raise ValueError("arena_half_extent must be > 0")
        h = self.arena_half_extent
        for ob in self.obstacles:
            if _obstacle_reach(ob) > h + 1e-9:
                raise ValueError(f"obstacle extends outside arena: {ob}")
        self._compile()

    def _compile(self) -> None:
        circles = [ob for ob in self.obstacles if isinstance(ob, Circle)]
        boxes = [ob for ob in self.obstacles if isinstance(ob, AxisBox)]
        segments = [ob for ob in self.obstacles if isinstance(ob, Segment)]
        self._circles = np.array(
            [[c.center.x, c.center.y, c.radius] for c in circles], dtype=np.float64
        ).reshape(-1, 3)
        self._boxes = np.array(
            [[b.center.x, b.center.y, b.half_extents.x, b.half_extents.y] for b in boxes],
            dtype=np.float64,
        ).reshape(-1, 4)
        self._segments = np.array(
            [[s.a.x, s.a.y, s.b.x, s.b.y, 0.5 * s.thickness] for s in segments],
            dtype=np.float64,
        ).reshape(-1, 5)


def _obstacle_reach(ob: Obstacle) -> float:
    """Largest |coordinate| the obstacle touches, for arena containment."""
    if isinstance(ob, Circle):
        return max(abs(ob.center.x), abs(ob.center.y)) + ob.radius
    if isinstance(ob, AxisBox):
        return max(abs(ob.center.x) + ob.half_extents.x, abs(ob.center.y) + ob.half_extents.y)
    r = 0.5 * ob.thickness
    return max(abs(ob.a.x), abs(ob.a.y), abs(ob.b.x), abs(ob.b.y)) + r


@dataclass(frozen=True)
class LidarSpec:
    n_rays: int
    min_range: float = 0.3
    max_range: float = 2.5
    angle_offset: float = 0.0

    def __post_init__(self):
        if self.n_rays not in (36, 360):
            raise ValueError(f"n_rays must be 36 or 360, got {self.n_rays}")
        if not (0 < self.min_range < self.max_range):
            raise ValueError("require 0 < min_range < max_range")

    def body_angles(self) -> np.ndarray:
        return self.angle_offset + TWO_PI * np.arange(self.n_rays) / self.n_rays


@dataclass
class LidarScan:
    """Clamped ranges, ray i at body angle ``angle_offset + 2*pi*i/n``."""

    ranges: np.ndarray
    spec: LidarSpec


@dataclass(frozen=True)
class CollisionCapsule:
    """Stadium-shaped footprint: a segment of half-length
    ``segment_half_length`` along body x, centered on the robot center,
    inflated by ``radius_col`` (collision) and ``radius_crit`` (critical).
    """

    radius_col: float = 0.325
    radius_crit: float = 0.525
    segment_half_length: float = 0.15

    def __post_init__(self):
        if not (self.radius_crit > self.radius_col > 0):
            raise ValueError("require radius_crit > radius_col > 0")
        if self.segment_half_length < 0:
            raise ValueError("segment_half_length must be >= 0")

    @property
    def max_reach(self) -> float:
        """Largest critical threshold over all body angles."""
        return self.segment_half_length + self.radius_crit


class Zone(IntEnum):
    FREE = 0
    CRITICAL = 1
    COLLISION = 2


# ---------------------------------------------------------------------------
# Capsule boundary distances


def _capsule_boundary(radius: float, half_len: float, angles: np.ndarray) -> np.ndarray:
    """Distance from center to the capsule boundary along each body angle."""
    c = np.abs(np.cos(angles))
    s = np.abs(np.sin(angles))
    flat = radius * c <= half_len * s
    with np.errstate(divide="ignore", invalid="ignore"):
        d_flat = radius / s
    d_cap = half_len * c + np.sqrt(np.maximum(radius**2 - (half_len * s) ** 2, 0.0))
    return np.where(flat, d_flat, d_cap)


def capsule_threshold(capsule: CollisionCapsule, body_angle: float) -> tuple[float, float]:
    """(d_col, d_crit) thresholds along the ray at ``body_angle``."""
    a = np.array([body_angle], dtype=np.float64)
    d_col = _capsule_boundary(capsule.radius_col, capsule.segment_half_length, a)
    d_crit = _capsule_boundary(capsule.radius_crit, capsule.segment_half_length, a)
    return float(d_col[0]), float(d_crit[0])


@lru_cache(maxsize=64)
def _threshold_table(
    capsule: CollisionCapsule, n_rays: int, angle_offset: float
) -> tuple[np.ndarray, np.ndarray]:
    angles = angle_offset + TWO_PI * np.arange(n_rays) / n_rays
    d_col = _capsule_boundary(capsule.radius_col, capsule.segment_half_length, angles)
    d_crit = _capsule_boundary(capsule.radius_crit, capsule.segment_half_length, angles)
    d_col.setflags(write=False)
    d_crit.setflags(write=False)
    return d_col, d_crit


def threshold_arrays(capsule: CollisionCapsule, spec: LidarSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-ray (d_col, d_crit) arrays for a scan geometry."""
    return _threshold_table(capsule, spec.n_rays, spec.angle_offset)


def classify_proximity(scan: LidarScan, capsule: CollisionCapsule) -> np.ndarray:
    """Per-ray zone: COLLISION if d < d_col, CRITICAL if d < d_crit, else FREE."""
    d_col, d_crit = threshold_arrays(capsule, scan.spec)
    zones = np.full(scan.spec.n_rays, Zone.FREE, dtype=np.int64)
    zones[scan.ranges < d_crit] = Zone.CRITICAL
    zones[scan.ranges < d_col] = Zone.COLLISION
    return zones


# ---------------------------------------------------------------------------
# Raycasting


def _ray_circle(origin, dirs, circles):
    """Hit distances (n_rays, n_circles); inf where a ray misses."""
    oc = origin[None, :] - circles[:, :2]  # (k, 2)
    beta = dirs @ oc.T  # (n, k)
    c0 = np.sum(oc * oc, axis=1) - circles[:, 2] ** 2  # (k,)
    disc = beta * beta - c0[None, :]
    sq = np.sqrt(np.maximum(disc, 0.0))
    t1 = -beta - sq
    t2 = -beta + sq
    t = np.where(t1 >= 0.0, t1, np.where(t2 >= 0.0, t2, np.inf))
    return np.where(disc >= 0.0, t, np.inf)


def _ray_slab(p, d, lo, hi):
    """Entry/exit params of rays against one axis slab [lo, hi]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - p) / d
        t2 = (hi - p) / d
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    parallel = d == 0.0
    inside = (p >= lo) & (p <= hi)
    near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
    far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
    return near, far


def _ray_box(origin, dirs, cx, cy, hx, hy):
    """Hit distances (n_rays,) against one axis-aligned box."""
    nx, fx = _ray_slab(origin[0], dirs[:, 0], cx - hx, cx + hx)
    ny, fy = _ray_slab(origin[1], dirs[:, 1], cy - hy, cy + hy)
    tnear = np.maximum(nx, ny)
    tfar = np.minimum(fx, fy)
    hit = (tnear <= tfar) & (tfar >= 0.0)
    t = np.where(tnear >= 0.0, tnear, tfar)
    return np.where(hit, t, np.inf)


def _ray_stadium(origin, dirs, seg):
    """Hit distances (n_rays,) against one thick segment (stadium shape)."""
    ax, ay, bx, by, rho = seg
    ab = np.array([bx - ax, by - ay])
    length = math.hypot(ab[0], ab[1])
    if length < 1e-12:
        if rho > 0.0:
            circ = np.array([[ax, ay, rho]])
            return _ray_circle(origin, dirs, circ).min(axis=1)
        return np.full(dirs.shape[0], np.inf)
    ux, uy = ab / length
    # transform into the segment frame (a at origin, b at (length, 0))
    rel = origin - np.array([ax, ay])
    o_local = np.array([rel[0] * ux + rel[1] * uy, -rel[0] * uy + rel[1] * ux])
    d_local = np.stack(
        [dirs[:, 0] * ux + dirs[:, 1] * uy, -dirs[:, 0] * uy + dirs[:, 1] * ux], axis=1
    )
    t = _ray_box(o_local, d_local, 0.5 * length, 0.0, 0.5 * length, rho)
    if rho > 0.0:
        caps = np.array([[0.0, 0.0, rho], [length, 0.0, rho]])
        t = np.minimum(t, _ray_circle(o_local, d_local, caps).min(axis=1))
    return t


def _ray_walls(origin, dirs, half):
    """Distance to the arena boundary from an interior point."""
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(
            dirs[:, 0] > 0.0,
            (half - origin[0]) / dirs[:, 0],
            np.where(dirs[:, 0] < 0.0, (-half - origin[0]) / dirs[:, 0], np.inf),
        )
        ty = np.where(
            dirs[:, 1] > 0.0,
            (half - origin[1]) / dirs[:, 1],
            np.where(dirs[:, 1] < 0.0, (-half - origin[1]) / dirs[:, 1], np.inf),
        )
    return np.minimum(tx, ty)


def raycast(world: WorldSpec, pose: Pose2D, spec: LidarSpec) -> LidarScan:
    """Cast ``spec.n_rays`` rays from the robot center and return ranges to
    the nearest obstacle or arena wall, clamped to [min_range, max_range].
    """
    origin = pose.position.as_array()
    angles = pose.yaw + spec.body_angles()
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)

    t = _ray_walls(origin, dirs, world.arena_half_extent)
    if world._circles.shape[0]:
        t = np.minimum(t, _ray_circle(origin, dirs, world._circles).min(axis=1))
    for box in world._boxes:
        t = np.minimum(t, _ray_box(origin, dirs, box[0], box[1], box[2], box[3]))
    for seg in world._segments:
        t = np.minimum(t, _ray_stadium(origin, dirs, seg))

    ranges = np.clip(t, spec.min_range, spec.max_range)
    return LidarScan(ranges=ranges, spec=spec)


# ---------------------------------------------------------------------------
# Point clearance (used for spawn rejection sampling and by test oracles)


def point_clearance(world: WorldSpec, point: Vec2) -> float:
    """Distance from a point to the nearest obstacle surface or arena wall.

    Negative inside an obstacle or outside the arena.
    """
    p = point.as_array()
    h = world.arena_half_extent
    best = h - max(abs(p[0]), abs(p[1]))
    for row in world._circles:
        best = min(best, math.hypot(p[0] - row[0], p[1] - row[1]) - row[2])
    for row in world._boxes:
        qx = abs(p[0] - row[0]) - row[2]
        qy = abs(p[1] - row[1]) - row[3]
        outside = math.hypot(max(qx, 0.0), max(qy, 0.0))
        inside = min(max(qx, qy), 0.0)
        best = min(best, outside + inside)
    for row in world._segments:
        best = min(best, _point_segment_distance(p, row) - row[4])
    return best


def _point_segment_distance(p, seg) -> float:
    ax, ay, bx, by = seg[:4]
    abx, aby = bx - ax, by - ay
    denom = abx * abx + aby * aby
    if denom < 1e-24:
        return math.hypot(p[0] - ax, p[1] - ay)
    s = ((p[0] - ax) * abx + (p[1] - ay) * aby) / denom
    s = min(max(s, 0.0), 1.0)
    return math.hypot(p[0] - (ax + s * abx), p[1] - (ay + s * aby))


# ---------------------------------------------------------------------------
# Kinematics


def integrate_kinematics(pose: Pose2D, cmd: VelocityCommand, dt: float) -> Pose2D:
    """First-order Euler step with the body frame evaluated at step start."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    x = pose.position.x + dt * (c * cmd.vx - s * cmd.vy)
    y = pose.position.y + dt * (s * cmd.vx + c * cmd.vy)
    return Pose2D(position=Vec2(x, y), yaw=wrap_angle(pose.yaw + dt * cmd.omega))


# ---------------------------------------------------------------------------
# WorldSpec serialization (YAML-friendly dicts)


def world_to_dict(world: WorldSpec) -> dict:
    obstacles = []
    for ob in world.obstacles:
        if isinstance(ob, Circle):
            obstacles.append(
                {"type": "circle", "center": [ob.center.x, ob.center.y], "radius": ob.radius}
            )
        elif isinstance(ob, AxisBox):
            obstacles.append(
                {
                    "type": "box",
                    "center": [ob.center.x, ob.center.y],
                    "half_extents": [ob.half_extents.x, ob.half_extents.y],
                }
            )
        else:
            obstacles.append(
                {
                    "type": "segment",
                    "a": [ob.a.x, ob.a.y],
                    "b": [ob.b.x, ob.b.y],
                    "thickness": ob.thickness,
                }
            )
    return {"arena_half_extent": world.arena_half_extent, "obstacles": obstacles}


def world_from_dict(data: dict) -> WorldSpec:
    obstacles: list[Obstacle] = []
    for entry in data.get("obstacles", []):
        kind = entry.get("type")
        if kind == "circle":
            obstacles.append(Circle(center=Vec2(*entry["center"]), radius=float(entry["radius"])))
        elif kind == "box":
            obstacles.append(
                AxisBox(center=Vec2(*entry["center"]), half_extents=Vec2(*entry["half_extents"]))
            )
        elif kind == "segment":
            obstacles.append(
                Segment(
                    a=Vec2(*entry["a"]),
                    b=Vec2(*entry["b"]),
                    thickness=float(entry.get("thickness", 0.0)),
                )
            )
        else:
            raise ValueError(f"unknown obstacle type: {kind!r}")
    return WorldSpec(arena_half_extent=float(data["arena_half_extent"]), obstacles=obstacles)


def load_world(path) -> WorldSpec:
    import yaml

    with open(path) as fh:
        return world_from_dict(yaml.safe_load(fh))


def save_world(world: WorldSpec, path) -> None:
    import yaml

    with open(path, "w") as fh:
        yaml.safe_dump(world_to_dict(world), fh, sort_keys=False)
