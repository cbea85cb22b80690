import { describe, expect, it } from "vitest";

import { TRAIL_CAP, TrailBuffer } from "../src/trail.js";

describe("TrailBuffer", () => {
  it("accumulates tails without duplicating the overlap", () => {
    const trail = new TrailBuffer();
    trail.merge([[0, 0], [1, 0]]);
    trail.merge([[1, 0], [2, 0], [3, 0]]);
    expect(trail.asArray()).toEqual([[0, 0], [1, 0], [2, 0], [3, 0]]);
  });

  it("appends everything when tails do not overlap (dropped frames)", () => {
    const trail = new TrailBuffer();
    trail.merge([[0, 0]]);
    trail.merge([[5, 5], [6, 6]]);
    expect(trail.length).toBe(3);
  });

  it("caps at the configured length", () => {
    const trail = new TrailBuffer();
    for (let i = 0; i < TRAIL_CAP + 500; i++) {
      trail.merge([[i, i]]);
    }
    expect(trail.length).toBe(TRAIL_CAP);
    expect(trail.asArray()[0]).toEqual([500, 500]);
  });

  it("clear empties the history", () => {
    const trail = new TrailBuffer();
    trail.merge([[1, 2], [3, 4]]);
    trail.clear();
    expect(trail.length).toBe(0);
  });
});
