/** Telemetry schema v1 decoding.
 *
 * The server pushes one JSON object per frame. Unknown fields are ignored
 * so newer servers keep working with this console; missing or ill-typed
 * required fields reject the frame instead of rendering garbage.
 */

export const SCHEMA_VERSION = 1;

export const SECTION_NAMES = [
  "Connection",
  "Disconnection",
  "Questioning",
  "End",
] as const;

export type SectionName = (typeof SECTION_NAMES)[number];

export interface TelemetryFrame {
  t: number;
  pressures: [number, number, number, number];
  normalized: [number, number, number, number];
  fatigue: number;
  section: SectionName;
  meters: Record<string, number>;
  running: boolean;
  degraded: boolean;
}

/** A reply to a command: either an ack or the engine's error text. */
export interface CommandReply {
  ok?: string;
  error?: string;
}

function vec4(v: unknown): [number, number, number, number] | null {
  if (!Array.isArray(v) || v.length !== 4) return null;
  const out: number[] = [];
  for (const x of v) {
    if (typeof x !== "number" || !Number.isFinite(x)) return null;
    out.push(x);
  }
  return out as [number, number, number, number];
}

export function decodeTelemetry(raw: unknown): TelemetryFrame | null {
  if (typeof raw !== "object" || raw === null) return null;
  const o = raw as Record<string, unknown>;
  if (o.v !== SCHEMA_VERSION) return null;
  if (typeof o.t !== "number" || !Number.isFinite(o.t)) return null;
  const pressures = vec4(o.pressures);
  const normalized = vec4(o.normalized);
  if (!pressures || !normalized) return null;
  if (typeof o.fatigue !== "number") return null;
  if (typeof o.section !== "string") return null;
  if (!(SECTION_NAMES as readonly string[]).includes(o.section)) return null;
  if (typeof o.running !== "boolean" || typeof o.degraded !== "boolean")
    return null;
  const meters: Record<string, number> = {};
  if (typeof o.meters === "object" && o.meters !== null) {
    for (const [k, v] of Object.entries(o.meters as Record<string, unknown>)) {
      if (typeof v === "number" && Number.isFinite(v)) meters[k] = v;
    }
  }
  return {
    t: o.t,
    pressures,
    normalized,
    fatigue: o.fatigue,
    section: o.section as SectionName,
    meters,
    running: o.running,
    degraded: o.degraded,
  };
}

/** Replies carry "ok" or "error" and no "pressures"; telemetry never does. */
export function decodeReply(raw: unknown): CommandReply | null {
  if (typeof raw !== "object" || raw === null) return null;
  const o = raw as Record<string, unknown>;
  if ("pressures" in o) return null;
  if (typeof o.ok === "string") return { ok: o.ok };
  if (typeof o.error === "string") return { error: o.error };
  return null;
}
