/** Live notation strip: four stacked pressure traces on a sliding window
 * with a purple rule at every section boundary.
 *
 * Conventions (colors, stacking, purple rules) match the offline SVG
 * exporter so a performer reads both the same way. Traces draw the
 * normalized channel on a fixed [0, 1] scale; a zero-variance channel is
 * a flat line at its level, never an autoscale blowup.
 */

import { Ring, WINDOW_S } from "./ring";
import type { SectionName, TelemetryFrame } from "./telemetry";

export const BOUNDARY_COLOR = "#800080";
export const TRACE_COLORS = ["#2166ac", "#1a9850", "#d6604d", "#8073ac"] as const;
export const N_TRACES = 4;

export interface Boundary {
  t: number;
  to: SectionName;
}

/** Section changes mark a boundary rule, except falling into End, which
 * stops the piece rather than opening a section. */
export function detectBoundary(
  prev: TelemetryFrame | undefined,
  cur: TelemetryFrame,
): Boundary | null {
  if (!prev || prev.section === cur.section) return null;
  if (cur.section === "End") return null;
  return { t: cur.t, to: cur.section };
}

/** The visible time range: the last WINDOW_S seconds ending at tLatest. */
export function viewWindow(tLatest: number, windowS: number = WINDOW_S): [number, number] {
  return [Math.max(0, tLatest - windowS), Math.max(tLatest, windowS)];
}

export function xForTime(t: number, t0: number, t1: number, width: number): number {
  if (t1 <= t0) return 0;
  return ((t - t0) / (t1 - t0)) * width;
}

export function yForValue(v: number, top: number, bandH: number): number {
  const c = v < 0 ? 0 : v > 1 ? 1 : v;
  return top + (1 - c) * bandH;
}

export interface BandLayout {
  top: number;
  height: number;
}

export function bandLayout(
  canvasH: number,
  n: number = N_TRACES,
  marginT = 6,
  marginB = 14,
  gap = 8,
): BandLayout[] {
  const usable = canvasH - marginT - marginB - gap * (n - 1);
  const h = Math.max(1, usable / n);
  const out: BandLayout[] = [];
  for (let k = 0; k < n; k += 1) {
    out.push({ top: marginT + k * (h + gap), height: h });
  }
  return out;
}

/** x/y pairs for one channel inside the window; points outside [t0, t1]
 * are skipped so the strip slides instead of squashing. */
export function tracePoints(
  frames: Ring<TelemetryFrame>,
  channel: number,
  t0: number,
  t1: number,
  width: number,
  band: BandLayout,
): number[] {
  const pts: number[] = [];
  frames.forEach((f) => {
    if (f.t < t0 || f.t > t1) return;
    pts.push(xForTime(f.t, t0, t1, width), yForValue(f.normalized[channel], band.top, band.height));
  });
  return pts;
}

/** Minimal 2D-context surface so tests can pass a recorder. */
export interface StripContext {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
}

export function drawStrip(
  ctx: StripContext,
  width: number,
  height: number,
  frames: Ring<TelemetryFrame>,
  boundaries: Ring<Boundary>,
): void {
  ctx.clearRect(0, 0, width, height);
  const latest = frames.last();
  if (!latest) return;
  const [t0, t1] = viewWindow(latest.t);
  const bands = bandLayout(height);

  ctx.globalAlpha = 0.12;
  for (const b of bands) {
    ctx.fillStyle = "#888888";
    ctx.fillRect(0, b.top, width, b.height);
  }
  ctx.globalAlpha = 1;

  ctx.lineWidth = 1.5;
  for (let ch = 0; ch < N_TRACES; ch += 1) {
    const pts = tracePoints(frames, ch, t0, t1, width, bands[ch]);
    if (pts.length < 4) continue;
    ctx.strokeStyle = TRACE_COLORS[ch];
    ctx.beginPath();
    ctx.moveTo(pts[0], pts[1]);
    for (let i = 2; i < pts.length; i += 2) ctx.lineTo(pts[i], pts[i + 1]);
    ctx.stroke();
  }

  const rulesBottom = bands[N_TRACES - 1].top + bands[N_TRACES - 1].height;
  ctx.lineWidth = 2;
  ctx.strokeStyle = BOUNDARY_COLOR;
  ctx.fillStyle = BOUNDARY_COLOR;
  ctx.font = "10px system-ui, sans-serif";
  boundaries.forEach((b) => {
    if (b.t < t0 || b.t > t1) return;
    const x = xForTime(b.t, t0, t1, width);
    ctx.beginPath();
    ctx.moveTo(x, bands[0].top);
    ctx.lineTo(x, rulesBottom);
    ctx.stroke();
    ctx.fillText(b.to, Math.min(x + 3, width - 60), bands[0].top + 10);
  });
}
