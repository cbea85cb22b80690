// World-to-screen camera transforms for the canvas view.

import type { Pose } from "./types.js";

export type CameraMode = "top-down" | "follow";

export interface Camera {
  mode: CameraMode;
  widthPx: number;
  heightPx: number;
  /** world meters visible across the smaller screen dimension */
  spanM: number;
  robot: Pose;
}

/**
 * Map a world point to screen pixels.
 *
 * Top-down: world origin at the canvas center, +x right, +y up.
 * Follow: robot centered, rotated so the chair's forward axis points up.
 */
export function worldToScreen(camera: Camera, wx: number, wy: number): [number, number] {
  const scale = Math.min(camera.widthPx, camera.heightPx) / camera.spanM;
  let x = wx;
  let y = wy;
  if (camera.mode === "follow") {
    const dx = wx - camera.robot.x;
    const dy = wy - camera.robot.y;
    // rotate by (pi/2 - yaw): forward (+body x) maps to screen up
    const a = Math.PI / 2 - camera.robot.yaw;
    x = dx * Math.cos(a) - dy * Math.sin(a);
    y = dx * Math.sin(a) + dy * Math.cos(a);
  }
  return [camera.widthPx / 2 + x * scale, camera.heightPx / 2 - y * scale];
}

export function screenScale(camera: Camera): number {
  return Math.min(camera.widthPx, camera.heightPx) / camera.spanM;
}
