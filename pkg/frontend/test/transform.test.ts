import { describe, expect, it } from "vitest";

import { worldToScreen, type Camera } from "../src/transform.js";

const BASE: Camera = {
  mode: "top-down",
  widthPx: 800,
  heightPx: 800,
  spanM: 10,
  robot: { x: 0, y: 0, yaw: 0 },
};

describe("worldToScreen top-down", () => {
  it("origin maps to canvas center", () => {
    expect(worldToScreen(BASE, 0, 0)).toEqual([400, 400]);
  });

  it("+x is right, +y is up", () => {
    const [rx] = worldToScreen(BASE, 1, 0);
    const [, uy] = worldToScreen(BASE, 0, 1);
    expect(rx).toBeGreaterThan(400);
    expect(uy).toBeLessThan(400);
  });

  it("scale follows the span", () => {
    const [x] = worldToScreen(BASE, 5, 0);
    expect(x).toBe(800); // half the span reaches the edge
  });
});

describe("worldToScreen follow", () => {
  it("robot is centered", () => {
    const cam: Camera = { ...BASE, mode: "follow", robot: { x: 3, y: -2, yaw: 1.1 } };
    expect(worldToScreen(cam, 3, -2)).toEqual([400, 400]);
  });

  it("forward axis points up on screen", () => {
    const yaw = 0.7;
    const cam: Camera = { ...BASE, mode: "follow", robot: { x: 1, y: 1, yaw } };
    const ahead = worldToScreen(cam, 1 + Math.cos(yaw), 1 + Math.sin(yaw));
    expect(ahead[0]).toBeCloseTo(400, 6);
    expect(ahead[1]).toBeLessThan(400);
  });

  it("left of the chair is left on screen", () => {
    const yaw = -2.2;
    const cam: Camera = { ...BASE, mode: "follow", robot: { x: 0, y: 0, yaw } };
    const left = worldToScreen(cam, Math.cos(yaw + Math.PI / 2), Math.sin(yaw + Math.PI / 2));
    expect(left[1]).toBeCloseTo(400, 6);
    expect(left[0]).toBeLessThan(400);
  });
});
