// Websocket client: latest-wins in both directions. Incoming frames land
// in a single slot the render loop reads; outgoing inputs are sent on
// change or at the keepalive interval, never queued.

import {
  clampToUnitDisk,
  isFrame,
  isWorldMessage,
  type ErrorMessage,
  type TeleopCommand,
  type TeleopFrame,
  type WorldMessage,
} from "./types.js";
import { inputChanged } from "./input-math.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: string }) => void) | null;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
}

export const KEEPALIVE_MS = 100;

export class TeleopClient {
  latestFrame: TeleopFrame | null = null;
  world: WorldMessage | null = null;
  connected = false;
  onWorld: ((msg: WorldMessage) => void) | null = null;
  onError: ((msg: ErrorMessage) => void) | null = null;

  private lastSent: [number, number] = [0, 0];
  private lastSentAt = 0;

  /** The exact input last written to the wire (drawn as the input arrow). */
  get lastSentInput(): [number, number] {
    return this.lastSent;
  }

  constructor(private socket: SocketLike) {
    socket.onopen = () => {
      this.connected = true;
    };
    socket.onclose = () => {
      this.connected = false;
    };
    socket.onmessage = (ev) => {
      let parsed: unknown;
      try {
        parsed = JSON.parse(ev.data);
      } catch {
        return; // malformed frame: skip
      }
      if (isFrame(parsed)) {
        this.latestFrame = parsed; // latest wins; render loop samples it
      } else if (isWorldMessage(parsed)) {
        this.world = parsed;
        this.onWorld?.(parsed);
      } else if ((parsed as ErrorMessage)?.type === "error") {
        this.onError?.(parsed as ErrorMessage);
      }
    };
  }

  sendCommand(command: TeleopCommand): void {
    this.socket.send(JSON.stringify(command));
  }

  /**
   * Send the joystick state if it changed or the keepalive expired.
   * Always clamped to the unit disk before hitting the wire.
   */
  sendInput(ux: number, uy: number, nowMs: number): boolean {
    const clamped = clampToUnitDisk(ux, uy);
    const due = nowMs - this.lastSentAt >= KEEPALIVE_MS;
    if (!inputChanged(clamped, this.lastSent) && !due) {
      return false;
    }
    this.sendCommand({ type: "input", ux: clamped[0], uy: clamped[1] });
    this.lastSent = clamped;
    this.lastSentAt = nowMs;
    return true;
  }

  close(): void {
    this.socket.close();
  }
}
