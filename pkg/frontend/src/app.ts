// Entry point: wires the websocket client, input sources, renderer, and
// controls. Input is sampled at 50 Hz (sent on change or keepalive);
// rendering runs on animation frames against the latest received frame.

import { ControlBar } from "./controls.js";
import { GamepadSource } from "./gamepad.js";
import { VirtualJoystick } from "./joystick.js";
import { TeleopClient } from "./net.js";
import { Renderer } from "./render.js";
import { TrailBuffer } from "./trail.js";

function main(): void {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const controlsDiv = document.getElementById("controls") as HTMLElement;
  const joystickDiv = document.getElementById("joystick") as HTMLElement;

  const proto = location.protocol === "https:" ? "wss" : "ws";
  const socket = new WebSocket(`${proto}://${location.host}/teleop`);
  const client = new TeleopClient(socket as never);
  const renderer = new Renderer(canvas);
  const trail = new TrailBuffer();
  const joystick = new VirtualJoystick(joystickDiv);
  const gamepad = new GamepadSource();
  const controls = new ControlBar(controlsDiv, client, renderer, () => trail.clear());

  client.onWorld = (msg) => {
    trail.clear();
    controls.applyWorld(msg);
  };
  client.onError = (msg) => controls.showError(msg.message);

  setInterval(() => {
    const fromPad = gamepad.read();
    const [ux, uy] = fromPad ?? [joystick.ux, joystick.uy];
    client.sendInput(ux, uy, performance.now());
  }, 20);

  let lastTick = -1;
  const render = () => {
    const frame = client.latestFrame;
    if (frame && client.world) {
      if (frame.tick !== lastTick) {
        trail.merge(frame.trail);
        lastTick = frame.tick;
      }
      renderer.draw(client.world, frame, trail.asArray(), client.lastSentInput);
      const zone = ["free", "critical", "collision"][Math.min(frame.zone_worst, 2)];
      controls.setStatus(
        `${client.connected ? "connected" : "disconnected"} | ` +
        `policy ${frame.policy} | world ${frame.world} | zone ${zone}` +
        `${frame.paused ? " | paused" : ""}`,
      );
    }
    requestAnimationFrame(render);
  };
  requestAnimationFrame(render);
}

window.addEventListener("DOMContentLoaded", main);
