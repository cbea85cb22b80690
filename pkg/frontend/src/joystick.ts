// Pointer-driven virtual joystick pad: spring-to-center, unit-disk output.

import { padToInput } from "./input-math.js";

export class VirtualJoystick {
  ux = 0;
  uy = 0;
  active = false;

  private pad: HTMLElement;
  private knob: HTMLElement;
  private pointerId: number | null = null;

  constructor(container: HTMLElement) {
    this.pad = document.createElement("div");
    this.pad.className = "joystick-pad";
    this.knob = document.createElement("div");
    this.knob.className = "joystick-knob";
    this.pad.appendChild(this.knob);
    const legend = document.createElement("div");
    legend.className = "joystick-legend";
    legend.textContent = "up = forward, left = left";
    container.appendChild(this.pad);
    container.appendChild(legend);

    this.pad.addEventListener("pointerdown", (ev) => this.onDown(ev));
    this.pad.addEventListener("pointermove", (ev) => this.onMove(ev));
    this.pad.addEventListener("pointerup", (ev) => this.onUp(ev));
    this.pad.addEventListener("pointercancel", (ev) => this.onUp(ev));
    this.updateKnob(0, 0);
  }

  private radius(): number {
    return this.pad.clientWidth / 2;
  }

  private onDown(ev: PointerEvent): void {
    if (this.pointerId !== null) return;
    this.pointerId = ev.pointerId;
    this.active = true;
    this.pad.setPointerCapture(ev.pointerId);
    this.onMove(ev);
  }

  private onMove(ev: PointerEvent): void {
    if (ev.pointerId !== this.pointerId) return;
    const rect = this.pad.getBoundingClientRect();
    const dx = ev.clientX - (rect.left + rect.width / 2);
    const dy = ev.clientY - (rect.top + rect.height / 2);
    [this.ux, this.uy] = padToInput(dx, dy, this.radius());
    this.updateKnob(dx, dy);
  }

  private onUp(ev: PointerEvent): void {
    if (ev.pointerId !== this.pointerId) return;
    this.pointerId = null;
    this.active = false;
    this.ux = 0;
    this.uy = 0;
    this.updateKnob(0, 0);
  }

  private updateKnob(dx: number, dy: number): void {
    const r = this.radius();
    const len = Math.hypot(dx, dy);
    if (len > r && len > 0) {
      dx *= r / len;
      dy *= r / len;
    }
    this.knob.style.transform = `translate(${dx}px, ${dy}px)`;
  }
}
