// Wire protocol types for the /teleop websocket, mirrored from the serve
// documentation, plus input normalization helpers shared by all sources.

export interface Pose {
  x: number;
  y: number;
  yaw: number;
}

export interface TeleopFrame {
  type: "frame";
  tick: number;
  sim_time: number;
  paused: boolean;
  pose: Pose;
  cmd: { vx: number; vy: number; omega: number };
  input: { ux: number; uy: number };
  lidar: number[];
  zones: number[];
  zone_worst: number;
  trail: [number, number][];
  policy: string;
  world: string;
}

export interface ObstacleDef {
  type: "circle" | "box" | "segment";
  center?: [number, number];
  radius?: number;
  half_extents?: [number, number];
  a?: [number, number];
  b?: [number, number];
  thickness?: number;
}

export interface WorldMessage {
  type: "world";
  world: { arena_half_extent: number; obstacles: ObstacleDef[] };
  capsule: { radius_col: number; radius_crit: number; segment_half_length: number };
  policies: string[];
  worlds: string[];
  active_policy: string;
  active_world: string;
  v_max_lin: number;
  omega_max: number;
  lidar: { n_rays: number; max_range: number };
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = TeleopFrame | WorldMessage | ErrorMessage;

export type TeleopCommand =
  | { type: "input"; ux: number; uy: number }
  | { type: "reset" }
  | { type: "select_world"; name: string }
  | { type: "select_policy"; name: string }
  | { type: "pause"; value: boolean };

export function isFrame(msg: unknown): msg is TeleopFrame {
  const m = msg as TeleopFrame;
  return (
    !!m && m.type === "frame" && typeof m.tick === "number" &&
    !!m.pose && typeof m.pose.x === "number" && Array.isArray(m.lidar)
  );
}

export function isWorldMessage(msg: unknown): msg is WorldMessage {
  const m = msg as WorldMessage;
  return (
    !!m && m.type === "world" && !!m.world &&
    typeof m.world.arena_half_extent === "number" &&
    Array.isArray(m.world.obstacles)
  );
}

/** Clamp a raw 2D input onto the unit disk, preserving direction. */
export function clampToUnitDisk(x: number, y: number): [number, number] {
  const norm = Math.hypot(x, y);
  if (!Number.isFinite(norm)) return [0, 0];
  if (norm <= 1) return [x, y];
  return [x / norm, y / norm];
}
