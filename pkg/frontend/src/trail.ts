// Trajectory polyline accumulator: merges per-frame tails into a single
// capped history so dropped frames leave no gaps.

export const TRAIL_CAP = 2000;

export class TrailBuffer {
  private points: [number, number][] = [];

  get length(): number {
    return this.points.length;
  }

  asArray(): readonly [number, number][] {
    return this.points;
  }

  clear(): void {
    this.points = [];
  }

  /** Append the frame tail, skipping points already at the head. */
  merge(tail: [number, number][]): void {
    let start = 0;
    const last = this.points[this.points.length - 1];
    if (last !== undefined) {
      for (let i = tail.length - 1; i >= 0; i--) {
        if (tail[i][0] === last[0] && tail[i][1] === last[1]) {
          start = i + 1;
          break;
        }
      }
    }
    for (let i = start; i < tail.length; i++) {
      this.points.push(tail[i]);
    }
    if (this.points.length > TRAIL_CAP) {
      this.points.splice(0, this.points.length - TRAIL_CAP);
    }
  }
}
