/** Breath-gesture state and the pad geometry that feeds it.
 *
 * The console steers the simulated performer: breathing depth and rate on
 * one XY pad, the distribution of breath across the four body zones on a
 * second pad, and four manual per-pillow crush sliders.
 */

export const ZONE_LABELS = [
  "Lower abdominals",
  "Ribcage",
  "Sternum",
  "Thoracolumbar fascia",
] as const;

export const RATE_RANGE_HZ: [number, number] = [0.05, 1.0];
export const DEPTH_RANGE: [number, number] = [0.0, 1.0];

export function clamp01(x: number): number {
  return x < 0 ? 0 : x > 1 ? 1 : x;
}

/** Zone weights are normalized to sum 1 before they are ever sent. */
export function normalizeBias(w: readonly number[]): [number, number, number, number] {
  const c = [0, 0, 0, 0];
  for (let i = 0; i < 4; i += 1) {
    const v = w[i];
    c[i] = typeof v === "number" && Number.isFinite(v) && v > 0 ? v : 0;
  }
  const sum = c[0] + c[1] + c[2] + c[3];
  if (sum <= 0) return [0.25, 0.25, 0.25, 0.25];
  return [c[0] / sum, c[1] / sum, c[2] / sum, c[3] / sum];
}

/** Bilinear corner weights for the zone pad; sums to 1 by construction.
 *
 * Corner order matches the zone order: bottom-left lower abdominals,
 * bottom-right ribcage, top-left sternum, top-right fascia. y runs
 * upward (1 = top of the pad).
 */
export function zonePadWeights(x: number, y: number): [number, number, number, number] {
  const u = clamp01(x);
  const v = clamp01(y);
  return [(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v];
}

/** XY pad position to (depth, rate): y up is deeper, x right is faster. */
export function breathPadValues(x: number, y: number): { depth: number; rate: number } {
  const [r0, r1] = RATE_RANGE_HZ;
  return {
    depth: clamp01(y),
    rate: r0 + clamp01(x) * (r1 - r0),
  };
}

export function clampCrush(values: readonly number[]): [number, number, number, number] {
  const out: number[] = [0, 0, 0, 0];
  for (let i = 0; i < 4; i += 1) {
    const v = values[i];
    out[i] = typeof v === "number" && Number.isFinite(v) ? clamp01(v) : 0;
  }
  return out as [number, number, number, number];
}
