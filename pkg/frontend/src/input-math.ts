// Pure input-mapping math, shared by the pointer joystick and the gamepad,
// kept DOM-free so it is unit-testable.
//
// Screen convention: pad up = chair forward (+ux), pad left = chair left
// (+uy). Screen y grows downward, hence both axes negate.

import { clampToUnitDisk } from "./types.js";

/** Pointer offset from the pad center (screen px) to a body-frame input. */
export function padToInput(dxPx: number, dyPx: number, radiusPx: number): [number, number] {
  if (radiusPx <= 0) return [0, 0];
  return clampToUnitDisk(-dyPx / radiusPx, -dxPx / radiusPx);
}

/** Standard-mapping gamepad left stick to a body-frame input. */
export function stickToInput(axis0: number, axis1: number, deadzone = 0.08): [number, number] {
  const [ux, uy] = clampToUnitDisk(-axis1, -axis0);
  return Math.hypot(ux, uy) < deadzone ? [0, 0] : [ux, uy];
}

/** True when two inputs differ enough to be worth a wire message. */
export function inputChanged(
  a: [number, number],
  b: [number, number],
  epsilon = 1e-3,
): boolean {
  return Math.abs(a[0] - b[0]) > epsilon || Math.abs(a[1] - b[1]) > epsilon;
}
