/**
 * Browser entry point: wires the WebSocket, pointer input, and controls to
 * the session and renderer. All decision logic lives in session/render.
 */

import { ModelDoc } from "./kinematics.js";
import { buildViewModel, paintSide, paintTopDown } from "./render.js";
import { CockpitSession, Transport } from "./session.js";
import { CommandMessage, parseServerMessage } from "./protocol.js";

const DRAG_METERS_PER_PIXEL = 0.002; // 10 cm per 50 px of pointer travel

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const model: ModelDoc = await (await fetch("/model")).json();
  const banner = el<HTMLDivElement>("banner");
  const showBanner = (text: string) => {
    banner.textContent = text;
    banner.classList.toggle("hidden", text === "");
  };

  const url = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws?role=controller`;
  const socket = new WebSocket(url);
  const transport: Transport = {
    send: (m: CommandMessage) => socket.send(JSON.stringify(m)),
    connected: () => socket.readyState === WebSocket.OPEN,
  };
  const session = new CockpitSession(transport, showBanner);

  socket.onmessage = (ev) => {
    try {
      const msg = parseServerMessage(String(ev.data));
      if (msg.type === "state") session.onState(msg);
      else if (msg.type === "record") {
        session.onRecordReply(msg.status);
        recordBtn.textContent = session.recording ? "Stop recording" : "Record";
        if (msg.status === "stopped") showBanner(`recording stopped (${msg.ticks ?? 0} ticks)`);
      } else showBanner(`service error: ${msg.error}`);
    } catch (e) {
      showBanner(`schema mismatch: ${(e as Error).message}`); // stream continues
    }
  };
  socket.onclose = () => showBanner("disconnected");

  // -- controls --------------------------------------------------------
  const topCanvas = el<HTMLCanvasElement>("topdown");
  const sideCanvas = el<HTMLCanvasElement>("side");
  const gripper = el<HTMLInputElement>("gripper");
  const recordBtn = el<HTMLButtonElement>("record");
  const modeSelect = el<HTMLSelectElement>("mode");
  const clutchLabel = el<HTMLSpanElement>("clutch-state");
  const controls = [gripper, recordBtn, modeSelect];

  gripper.oninput = () => session.setGripper(Number(gripper.value));
  recordBtn.onclick = () => session.toggleRecord();
  modeSelect.onchange = () => session.setMode(modeSelect.value as "keypose" | "dense" | "terminate");
  el<HTMLButtonElement>("reset").onclick = () => transport.send({ type: "reset" });

  // Absolute target side panel
  el<HTMLButtonElement>("send-absolute").onclick = () => {
    const vals = el<HTMLInputElement>("absolute-pose")
      .value.split(",")
      .map((s) => Number(s.trim()));
    if (vals.length !== 7 || vals.some((v) => !Number.isFinite(v))) {
      showBanner("absolute pose needs px,py,pz,qw,qx,qy,qz");
      return;
    }
    session.setAbsoluteTarget({ pos: [vals[0], vals[1], vals[2]], quat: [vals[3], vals[4], vals[5], vals[6]] });
  };

  // Clutch: hold space or pointer-down on the side view; drag moves target.
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  sideCanvas.onpointerdown = (ev) => {
    session.engageClutch();
    dragging = true;
    lastX = ev.clientX;
    lastY = ev.clientY;
    sideCanvas.setPointerCapture(ev.pointerId);
  };
  sideCanvas.onpointermove = (ev) => {
    if (!dragging) return;
    // screen-x -> world-x, screen-y (up) -> world-z
    session.drag([(ev.clientX - lastX) * DRAG_METERS_PER_PIXEL, 0, (lastY - ev.clientY) * DRAG_METERS_PER_PIXEL]);
    lastX = ev.clientX;
    lastY = ev.clientY;
  };
  const release = () => {
    dragging = false;
    session.disengageClutch();
  };
  sideCanvas.onpointerup = release;
  sideCanvas.onpointercancel = release;
  topCanvas.onpointerdown = (ev) => {
    session.engageClutch();
    dragging = true;
    lastX = ev.clientX;
    lastY = ev.clientY;
    topCanvas.setPointerCapture(ev.pointerId);
  };
  topCanvas.onpointermove = (ev) => {
    if (!dragging) return;
    // top-down: screen-x -> world-x, screen-y (up) -> world-y
    session.drag([(ev.clientX - lastX) * DRAG_METERS_PER_PIXEL, (lastY - ev.clientY) * DRAG_METERS_PER_PIXEL, 0]);
    lastX = ev.clientX;
    lastY = ev.clientY;
  };
  topCanvas.onpointerup = release;
  topCanvas.onpointercancel = release;

  // -- render loop -------------------------------------------------------
  const badgesDiv = el<HTMLDivElement>("badges");
  const frame = () => {
    session.flush();
    const state = session.state;
    if (state) {
      const vm = buildViewModel(model, state, session.targetPose());
      paintTopDown(topCanvas.getContext("2d")!, vm);
      paintSide(sideCanvas.getContext("2d")!, vm);
      badgesDiv.innerHTML = "";
      for (const b of vm.badges) {
        const span = document.createElement("span");
        span.className = `badge ${b.level}`;
        span.textContent = `${b.label}: ${b.distance.toFixed(3)} m`;
        badgesDiv.appendChild(span);
      }
      el<HTMLSpanElement>("mode-state").textContent = vm.mode;
      for (const c of controls) c.disabled = vm.disabled;
      clutchLabel.textContent = session.clutchEngaged ? "engaged" : "released";
      el<HTMLSpanElement>("record-state").classList.toggle("hidden", !session.recording);
    }
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

boot().catch((e) => {
  document.body.textContent = `failed to start: ${e}`;
});
