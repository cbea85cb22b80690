import { beforeEach, describe, expect, it } from "vitest";

import { KEEPALIVE_MS, TeleopClient } from "../src/net.js";
import type { SocketLike } from "../src/net.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  onmessage: ((ev: { data: string }) => void) | null = null;
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {}

  push(message: unknown): void {
    this.onmessage?.({ data: JSON.stringify(message) });
  }
}

const frame = (tick: number) => ({
  type: "frame",
  tick,
  sim_time: tick * 0.05,
  paused: false,
  pose: { x: tick, y: 0, yaw: 0 },
  cmd: { vx: 0, vy: 0, omega: 0 },
  input: { ux: 0, uy: 0 },
  lidar: [1],
  zones: [0],
  zone_worst: 0,
  trail: [],
  policy: "stub",
  world: "a",
});

describe("TeleopClient", () => {
  let socket: FakeSocket;
  let client: TeleopClient;

  beforeEach(() => {
    socket = new FakeSocket();
    client = new TeleopClient(socket);
  });

  it("keeps only the latest frame", () => {
    for (let i = 1; i <= 50; i++) socket.push(frame(i));
    expect(client.latestFrame?.tick).toBe(50);
  });

  it("ignores malformed payloads", () => {
    socket.onmessage?.({ data: "{not json" });
    socket.push({ type: "mystery" });
    expect(client.latestFrame).toBeNull();
  });

  it("dispatches world messages", () => {
    let seen = 0;
    client.onWorld = () => seen++;
    socket.push({ type: "world", world: { arena_half_extent: 5, obstacles: [] } });
    expect(seen).toBe(1);
    expect(client.world?.world.arena_half_extent).toBe(5);
  });

  it("sends input on change only, with keepalive", () => {
    expect(client.sendInput(0.5, 0, 0)).toBe(true);
    expect(client.sendInput(0.5, 0, 10)).toBe(false); // unchanged, not due
    expect(client.sendInput(0.6, 0, 20)).toBe(true); // changed
    expect(client.sendInput(0.6, 0, 20 + KEEPALIVE_MS)).toBe(true); // keepalive
    expect(socket.sent.length).toBe(3);
  });

  it("clamps input on the wire", () => {
    client.sendInput(3, 4, 0);
    const msg = JSON.parse(socket.sent[0]);
    expect(Math.hypot(msg.ux, msg.uy)).toBeLessThanOrEqual(1 + 1e-12);
    expect(msg.ux).toBeCloseTo(0.6, 12);
  });

  it("exposes the exact last-sent input for the arrow", () => {
    client.sendInput(0.25, -0.5, 0);
    expect(client.lastSentInput).toEqual([0.25, -0.5]);
    const msg = JSON.parse(socket.sent[0]);
    expect([msg.ux, msg.uy]).toEqual(client.lastSentInput);
  });

  it("forwards error messages", () => {
    let text = "";
    client.onError = (m) => (text = m.message);
    socket.push({ type: "error", message: "unknown world 'x'" });
    expect(text).toContain("unknown world");
  });

  it("serializes control commands", () => {
    client.sendCommand({ type: "pause", value: true });
    client.sendCommand({ type: "select_policy", name: "rds" });
    expect(JSON.parse(socket.sent[0])).toEqual({ type: "pause", value: true });
    expect(JSON.parse(socket.sent[1])).toEqual({ type: "select_policy", name: "rds" });
  });
});
