// Physical gamepad input via the Gamepad API, with pointer-pad fallback
// handled by the caller (null when no pad is connected).

import { stickToInput } from "./input-math.js";

export class GamepadSource {
  connected = false;
  private index: number | null = null;

  constructor() {
    window.addEventListener("gamepadconnected", (ev) => {
      this.index = (ev as GamepadEvent).gamepad.index;
      this.connected = true;
    });
    window.addEventListener("gamepaddisconnected", (ev) => {
      if ((ev as GamepadEvent).gamepad.index === this.index) {
        this.index = null;
        this.connected = false;
      }
    });
  }

  /** Current input, or null when no gamepad is available. */
  read(): [number, number] | null {
    if (this.index === null) return null;
    const pad = navigator.getGamepads()[this.index];
    if (!pad) {
      this.connected = false;
      this.index = null;
      return null;
    }
    return stickToInput(pad.axes[0] ?? 0, pad.axes[1] ?? 0);
  }
}
