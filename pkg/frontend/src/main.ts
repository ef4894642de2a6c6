/** Console entry point: wire the link, the rings, the sender, and the UI.
 *
 * Network callbacks only enqueue state (frames into rings, flags into
 * fields); all drawing happens on animation frames reading that state.
 */

import "./style.css";
import { CommandSender } from "./commands";
import { breathPadValues, clampCrush, normalizeBias, zonePadWeights } from "./gesture";
import { Boundary, detectBoundary, drawStrip } from "./notation";
import { FRAME_CAPACITY, Ring } from "./ring";
import { ConsoleLink } from "./socket";
import { decodeReply, decodeTelemetry, TelemetryFrame } from "./telemetry";
import { ConsoleUi } from "./ui";

function bridgeUrl(): string {
  const qs = new URLSearchParams(location.search).get("ws");
  if (qs) return qs;
  const host = location.hostname || "127.0.0.1";
  return `ws://${host}:8765`;
}

const frames = new Ring<TelemetryFrame>(FRAME_CAPACITY);
const boundaries = new Ring<Boundary>(64);
let latest: TelemetryFrame | null = null;

const link = new ConsoleLink(bridgeUrl());
const sender = new CommandSender((cmd) => link.send(cmd));

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const ui = new ConsoleUi(root, {
  onBreathPad(x, yUp) {
    const { depth, rate } = breathPadValues(x, yUp);
    sender.push({ cmd: "set_breath", depth, rate });
  },
  onZonePad(x, yUp) {
    sender.push({ cmd: "set_breath", zone_bias: normalizeBias(zonePadWeights(x, yUp)) });
  },
  onCrush(values) {
    sender.push({ cmd: "crush", values: clampCrush(values) });
  },
  onTransport(action) {
    sender.push({ cmd: "transport", action });
  },
  onCue(goto) {
    sender.push(goto ? { cmd: "cue", goto } : { cmd: "cue" });
  },
});

sender.onStale = (stale) => ui.setStale(stale);
ui.setStale(false);

link.onStatus = (status) => {
  ui.setStatus(status, latest?.degraded ?? false);
};

link.onMessage = (raw) => {
  const frame = decodeTelemetry(raw);
  if (frame) {
    const b = detectBoundary(frames.last(), frame);
    if (b) boundaries.push(b);
    frames.push(frame);
    latest = frame;
    return;
  }
  const reply = decodeReply(raw);
  if (reply?.error) ui.toast(reply.error);
  if (reply?.ok) sender.acked();
};

function fitCanvas(): void {
  const w = ui.canvas.clientWidth;
  if (w && ui.canvas.width !== w) ui.canvas.width = w;
}
window.addEventListener("resize", fitCanvas);

const ctx = ui.canvas.getContext("2d");

function frameLoop(): void {
  if (latest) {
    ui.setSection(latest.section);
    ui.setRunning(latest.running);
    ui.setFatigue(latest.fatigue);
    ui.setMeters(latest.meters);
    ui.setStatus(link.currentStatus, latest.degraded);
  }
  if (ctx) {
    fitCanvas();
    drawStrip(ctx, ui.canvas.width, ui.canvas.height, frames, boundaries);
  }
  requestAnimationFrame(frameLoop);
}

link.connect();
requestAnimationFrame(frameLoop);
