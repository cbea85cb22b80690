// Session control widgets: reset, pause, world and policy pickers, camera
// toggle, connection/zone status, and error toasts.

import type { TeleopClient } from "./net.js";
import type { Renderer } from "./render.js";
import type { WorldMessage } from "./types.js";

export class ControlBar {
  private pauseState = false;
  private worldSelect: HTMLSelectElement;
  private policySelect: HTMLSelectElement;
  private pauseButton: HTMLButtonElement;
  private status: HTMLElement;
  private toast: HTMLElement;

  constructor(
    container: HTMLElement,
    private client: TeleopClient,
    private renderer: Renderer,
    private onReset: () => void,
  ) {
    const resetButton = document.createElement("button");
    resetButton.textContent = "reset";
    resetButton.onclick = () => {
      this.client.sendCommand({ type: "reset" });
      this.onReset();
    };

    this.pauseButton = document.createElement("button");
    this.pauseButton.textContent = "pause";
    this.pauseButton.onclick = () => {
      this.pauseState = !this.pauseState;
      this.client.sendCommand({ type: "pause", value: this.pauseState });
      this.pauseButton.textContent = this.pauseState ? "resume" : "pause";
    };

    const cameraButton = document.createElement("button");
    cameraButton.textContent = "camera: top-down";
    cameraButton.onclick = () => {
      this.renderer.camera = this.renderer.camera === "top-down" ? "follow" : "top-down";
      cameraButton.textContent = `camera: ${this.renderer.camera}`;
    };

    this.worldSelect = document.createElement("select");
    this.worldSelect.onchange = () => {
      this.client.sendCommand({ type: "select_world", name: this.worldSelect.value });
      this.onReset();
    };
    this.policySelect = document.createElement("select");
    this.policySelect.onchange = () => {
      this.client.sendCommand({ type: "select_policy", name: this.policySelect.value });
    };

    this.status = document.createElement("span");
    this.status.className = "status";
    this.toast = document.createElement("div");
    this.toast.className = "toast hidden";

    for (const el of [
      resetButton, this.pauseButton, cameraButton,
      this.labeled("world", this.worldSelect),
      this.labeled("policy", this.policySelect),
      this.status,
    ]) {
      container.appendChild(el);
    }
    document.body.appendChild(this.toast);
  }

  private labeled(text: string, el: HTMLElement): HTMLElement {
    const wrap = document.createElement("label");
    wrap.textContent = text + " ";
    wrap.appendChild(el);
    return wrap;
  }

  applyWorld(msg: WorldMessage): void {
    const fill = (sel: HTMLSelectElement, names: string[], active: string) => {
      sel.innerHTML = "";
      for (const name of names) {
        const opt = document.createElement("option");
        opt.value = name;
        opt.textContent = name;
        opt.selected = name === active;
        sel.appendChild(opt);
      }
    };
    fill(this.worldSelect, msg.worlds, msg.active_world);
    fill(this.policySelect, msg.policies, msg.active_policy);
  }

  setStatus(text: string): void {
    this.status.textContent = text;
  }

  showError(message: string): void {
    this.toast.textContent = message;
    this.toast.classList.remove("hidden");
    setTimeout(() => this.toast.classList.add("hidden"), 2500);
  }
}
