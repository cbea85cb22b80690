// Canvas renderer: arena, obstacles, robot capsule outlines, LiDAR rays,
// trajectory polyline, and the current user-input arrow.

import type { Camera, CameraMode } from "./transform.js";
import { screenScale, worldToScreen } from "./transform.js";
import type { TeleopFrame, WorldMessage } from "./types.js";

const ZONE_COLORS = ["#3a7d44", "#e0a800", "#c0392b"]; // free / critical / collision

export class Renderer {
  camera: CameraMode = "top-down";

  constructor(private canvas: HTMLCanvasElement) {}

  draw(
    world: WorldMessage,
    frame: TeleopFrame,
    trail: readonly [number, number][],
    arrowInput?: [number, number],
  ): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const cam: Camera = {
      mode: this.camera,
      widthPx: this.canvas.width,
      heightPx: this.canvas.height,
      spanM: this.camera === "follow" ? 8 : 2 * world.world.arena_half_extent + 1,
      robot: frame.pose,
    };
    const scale = screenScale(cam);
    ctx.fillStyle = "#11151a";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);

    this.drawArena(ctx, cam, world);
    this.drawObstacles(ctx, cam, world);
    this.drawLidar(ctx, cam, world, frame);
    this.drawTrail(ctx, cam, trail);
    this.drawRobot(ctx, cam, world, frame, scale);
    // the arrow shows the exact input last sent; the frame echo is the
    // fallback before the first send
    const [ux, uy] = arrowInput ?? [frame.input.ux, frame.input.uy];
    this.drawInputArrow(ctx, cam, frame, ux, uy, scale);
  }

  private poly(ctx: CanvasRenderingContext2D, cam: Camera, pts: [number, number][]): void {
    pts.forEach(([wx, wy], i) => {
      const [sx, sy] = worldToScreen(cam, wx, wy);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
  }

  private drawArena(ctx: CanvasRenderingContext2D, cam: Camera, world: WorldMessage): void {
    const h = world.world.arena_half_extent;
    ctx.strokeStyle = "#5b6470";
    ctx.lineWidth = 2;
    ctx.beginPath();
    this.poly(ctx, cam, [[-h, -h], [h, -h], [h, h], [-h, h], [-h, -h]]);
    ctx.stroke();
  }

  private drawObstacles(ctx: CanvasRenderingContext2D, cam: Camera, world: WorldMessage): void {
    const scale = screenScale(cam);
    ctx.fillStyle = "#424a54";
    ctx.strokeStyle = "#424a54";
    for (const ob of world.world.obstacles) {
      if (ob.type === "circle" && ob.center && ob.radius) {
        const [sx, sy] = worldToScreen(cam, ob.center[0], ob.center[1]);
        ctx.beginPath();
        ctx.arc(sx, sy, ob.radius * scale, 0, 2 * Math.PI);
        ctx.fill();
      } else if (ob.type === "box" && ob.center && ob.half_extents) {
        const [cx, cy] = ob.center;
        const [hx, hy] = ob.half_extents;
        ctx.beginPath();
        this.poly(ctx, cam, [
          [cx - hx, cy - hy], [cx + hx, cy - hy],
          [cx + hx, cy + hy], [cx - hx, cy + hy], [cx - hx, cy - hy],
        ]);
        ctx.fill();
      } else if (ob.type === "segment" && ob.a && ob.b) {
        ctx.lineWidth = Math.max(2, (ob.thickness ?? 0) * scale);
        ctx.beginPath();
        this.poly(ctx, cam, [ob.a, ob.b]);
        ctx.stroke();
      }
    }
  }

  private drawLidar(
    ctx: CanvasRenderingContext2D, cam: Camera, world: WorldMessage, frame: TeleopFrame,
  ): void {
    const n = frame.lidar.length;
    if (!n) return;
    const { x, y, yaw } = frame.pose;
    ctx.lineWidth = 1;
    for (let i = 0; i < n; i++) {
      const angle = yaw + (2 * Math.PI * i) / n;
      const r = frame.lidar[i];
      const hit: [number, number] = [x + r * Math.cos(angle), y + r * Math.sin(angle)];
      ctx.strokeStyle =
        r < world.lidar.max_range - 1e-6 ? "rgba(140,190,255,0.45)" : "rgba(140,190,255,0.12)";
      ctx.beginPath();
      this.poly(ctx, cam, [[x, y], hit]);
      ctx.stroke();
    }
  }

  private drawTrail(
    ctx: CanvasRenderingContext2D, cam: Camera, trail: readonly [number, number][],
  ): void {
    if (trail.length < 2) return;
    ctx.strokeStyle = "#e4572e";
    ctx.lineWidth = 2;
    ctx.beginPath();
    this.poly(ctx, cam, trail as [number, number][]);
    ctx.stroke();
  }

  private capsulePath(
    ctx: CanvasRenderingContext2D, cam: Camera, frame: TeleopFrame,
    halfLen: number, radius: number, scale: number,
  ): void {
    const { x, y, yaw } = frame.pose;
    const c = Math.cos(yaw);
    const s = Math.sin(yaw);
    const ends: [number, number][] = [
      [x + halfLen * c, y + halfLen * s],
      [x - halfLen * c, y - halfLen * s],
    ];
    const [fx, fy] = worldToScreen(cam, ends[0][0], ends[0][1]);
    const [bx, by] = worldToScreen(cam, ends[1][0], ends[1][1]);
    const screenAngle = Math.atan2(by - fy, bx - fx);
    ctx.beginPath();
    ctx.arc(fx, fy, radius * scale, screenAngle + Math.PI / 2, screenAngle - Math.PI / 2);
    ctx.arc(bx, by, radius * scale, screenAngle - Math.PI / 2, screenAngle + Math.PI / 2);
    ctx.closePath();
  }

  private drawRobot(
    ctx: CanvasRenderingContext2D, cam: Camera, world: WorldMessage,
    frame: TeleopFrame, scale: number,
  ): void {
    const cap = world.capsule;
    const zoneColor = ZONE_COLORS[Math.min(frame.zone_worst, 2)];
    this.capsulePath(ctx, cam, frame, cap.segment_half_length, cap.radius_crit, scale);
    ctx.strokeStyle = frame.zone_worst >= 1 ? zoneColor : "rgba(160,170,180,0.5)";
    ctx.lineWidth = frame.zone_worst >= 1 ? 2.5 : 1;
    ctx.stroke();
    this.capsulePath(ctx, cam, frame, cap.segment_half_length, cap.radius_col, scale);
    ctx.strokeStyle = zoneColor;
    ctx.lineWidth = 2;
    ctx.stroke();

    // heading tick at the nose
    const { x, y, yaw } = frame.pose;
    const nose = cap.segment_half_length + cap.radius_col;
    ctx.strokeStyle = "#f0f3f7";
    ctx.lineWidth = 2;
    ctx.beginPath();
    this.poly(ctx, cam, [[x, y], [x + nose * Math.cos(yaw), y + nose * Math.sin(yaw)]]);
    ctx.stroke();
  }

  private drawInputArrow(
    ctx: CanvasRenderingContext2D, cam: Camera, frame: TeleopFrame,
    ux: number, uy: number, scale: number,
  ): void {
    if (Math.hypot(ux, uy) < 1e-3) return;
    const { x, y, yaw } = frame.pose;
    // body-frame input rotated into the world for display
    const wx = ux * Math.cos(yaw) - uy * Math.sin(yaw);
    const wy = ux * Math.sin(yaw) + uy * Math.cos(yaw);
    const tip: [number, number] = [x + wx, y + wy];
    ctx.strokeStyle = "#45d483";
    ctx.lineWidth = 3;
    ctx.beginPath();
    this.poly(ctx, cam, [[x, y], tip]);
    ctx.stroke();
    const [tx, ty] = worldToScreen(cam, tip[0], tip[1]);
    ctx.fillStyle = "#45d483";
    ctx.beginPath();
    ctx.arc(tx, ty, Math.max(3, 0.04 * scale), 0, 2 * Math.PI);
    ctx.fill();
  }
}
