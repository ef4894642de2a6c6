/** DOM construction and event plumbing for the console.
 *
 * The UI holds no authoritative performance state: section, transport and
 * degradation always re-derive from the latest telemetry, so a reload
 * lands on an identical view. User input leaves through callbacks only.
 */

import { ZONE_LABELS } from "./gesture";
import type { LinkStatus } from "./socket";
import type { SectionName } from "./telemetry";

export interface UiCallbacks {
  onBreathPad(x: number, yUp: number): void;
  onZonePad(x: number, yUp: number): void;
  onCrush(values: [number, number, number, number]): void;
  onTransport(action: "start" | "stop"): void;
  onCue(goto?: string): void;
}

const METER_KEYS = ["tape", "choir", "grain", "live", "master"] as const;
const CUE_SECTIONS: SectionName[] = ["Connection", "Disconnection", "Questioning"];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const n = document.createElement(tag);
  if (className) n.className = className;
  if (text !== undefined) n.textContent = text;
  return n;
}

/** A square pad that reports pointer position as (x, yUp) in [0,1]^2. */
function makePad(label: string, onMove: (x: number, yUp: number) => void): HTMLElement {
  const wrap = el("div", "pad-wrap");
  wrap.appendChild(el("div", "pad-label", label));
  const pad = el("div", "pad");
  const dot = el("div", "pad-dot");
  pad.appendChild(dot);
  wrap.appendChild(pad);

  const report = (ev: PointerEvent) => {
    const r = pad.getBoundingClientRect();
    const x = Math.min(1, Math.max(0, (ev.clientX - r.left) / r.width));
    const yTop = Math.min(1, Math.max(0, (ev.clientY - r.top) / r.height));
    dot.style.left = `${100 * x}%`;
    dot.style.top = `${100 * yTop}%`;
    onMove(x, 1 - yTop);
  };
  let down = false;
  pad.addEventListener("pointerdown", (ev) => {
    down = true;
    pad.setPointerCapture(ev.pointerId);
    report(ev);
  });
  pad.addEventListener("pointermove", (ev) => {
    if (down) report(ev);
  });
  pad.addEventListener("pointerup", () => {
    down = false;
  });
  return wrap;
}

export class ConsoleUi {
  readonly canvas: HTMLCanvasElement;
  private banner: HTMLElement;
  private staleTag: HTMLElement;
  private fatigueTag: HTMLElement;
  private toastBox: HTMLElement;
  private sectionBadges = new Map<string, HTMLElement>();
  private meterBars = new Map<string, HTMLElement>();
  private controls: (HTMLButtonElement | HTMLInputElement)[] = [];
  private startBtn: HTMLButtonElement;
  private crushInputs: HTMLInputElement[] = [];
  private online = false;
  private running = false;
  private shownStatus = "";
  private shownSection = "";
  private shownFatigue = "";

  constructor(root: HTMLElement, cb: UiCallbacks) {
    this.banner = el("div", "banner offline", "offline, reconnecting");
    root.appendChild(this.banner);

    const top = el("div", "row top-row");
    root.appendChild(top);

    // transport + section
    const transport = el("div", "panel transport");
    transport.appendChild(el("div", "panel-title", "Transport"));
    this.startBtn = el("button", "btn", "Start");
    this.startBtn.addEventListener("click", () => cb.onTransport("start"));
    const stopBtn = el("button", "btn", "Stop");
    stopBtn.addEventListener("click", () => cb.onTransport("stop"));
    const nextBtn = el("button", "btn", "Next section");
    nextBtn.addEventListener("click", () => cb.onCue());
    transport.append(this.startBtn, stopBtn, nextBtn);
    this.controls.push(stopBtn, nextBtn);

    const badges = el("div", "badges");
    for (const name of [...CUE_SECTIONS, "End"]) {
      const b = el("span", "badge", name);
      this.sectionBadges.set(name, b);
      badges.appendChild(b);
    }
    transport.appendChild(badges);
    const gotoRow = el("div", "goto-row");
    for (const name of CUE_SECTIONS) {
      const g = el("button", "btn btn-small", `Goto ${name}`);
      g.addEventListener("click", () => cb.onCue(name.toLowerCase()));
      gotoRow.appendChild(g);
      this.controls.push(g);
    }
    transport.appendChild(gotoRow);
    this.staleTag = el("span", "stale-tag", "stale");
    this.fatigueTag = el("div", "fatigue", "fatigue 0.00");
    transport.append(this.staleTag, this.fatigueTag);
    top.appendChild(transport);

    // pads
    top.appendChild(makePad("Breath: x rate, y depth", cb.onBreathPad));
    top.appendChild(
      makePad(`Zones: BL ${ZONE_LABELS[0]}, BR ${ZONE_LABELS[1]}, TL ${ZONE_LABELS[2]}, TR ${ZONE_LABELS[3]}`, cb.onZonePad),
    );

    // crush sliders
    const crush = el("div", "panel crush");
    crush.appendChild(el("div", "panel-title", "Crush"));
    const sliderRow = el("div", "slider-row");
    for (let i = 0; i < 4; i += 1) {
      const box = el("div", "slider-box");
      const input = el("input") as HTMLInputElement;
      input.type = "range";
      input.min = "0";
      input.max = "1";
      input.step = "0.01";
      input.value = "0";
      input.addEventListener("input", () => {
        cb.onCrush(this.crushInputs.map((s) => Number(s.value)) as [number, number, number, number]);
      });
      this.crushInputs.push(input);
      this.controls.push(input);
      box.appendChild(input);
      box.appendChild(el("div", "slider-label", `P${i + 1}`));
      sliderRow.appendChild(box);
    }
    crush.appendChild(sliderRow);
    top.appendChild(crush);

    // meters
    const meters = el("div", "panel meters");
    meters.appendChild(el("div", "panel-title", "Meters"));
    const meterRow = el("div", "meter-row");
    for (const k of METER_KEYS) {
      const box = el("div", "meter-box");
      const bar = el("div", "meter-bar");
      const fill = el("div", "meter-fill");
      bar.appendChild(fill);
      this.meterBars.set(k, fill);
      box.appendChild(bar);
      box.appendChild(el("div", "meter-label", k));
      meterRow.appendChild(box);
    }
    meters.appendChild(meterRow);
    top.appendChild(meters);

    // notation strip
    this.canvas = el("canvas", "strip");
    this.canvas.height = 420;
    root.appendChild(this.canvas);

    this.toastBox = el("div", "toasts");
    root.appendChild(this.toastBox);

    this.applyGating();
  }

  setStatus(status: LinkStatus, degraded: boolean): void {
    const key = `${status}/${degraded}`;
    if (key === this.shownStatus) return;
    this.shownStatus = key;
    this.online = status === "online";
    this.banner.className = `banner ${status}${degraded ? " degraded" : ""}`;
    this.banner.textContent =
      status === "online"
        ? degraded
          ? "online, input degraded (holding last frame)"
          : "online"
        : status === "connecting"
          ? "connecting"
          : "offline, reconnecting";
    this.applyGating();
  }

  setSection(name: SectionName): void {
    if (name === this.shownSection) return;
    this.shownSection = name;
    for (const [n, b] of this.sectionBadges) {
      b.className = n === name ? "badge active" : "badge";
    }
  }

  setRunning(running: boolean): void {
    if (running !== this.running) {
      this.running = running;
      this.applyGating();
    }
  }

  setFatigue(f: number): void {
    const text = `fatigue ${f.toFixed(2)}`;
    if (text === this.shownFatigue) return;
    this.shownFatigue = text;
    this.fatigueTag.textContent = text;
  }

  setMeters(meters: Record<string, number>): void {
    for (const [k, fill] of this.meterBars) {
      const v = meters[k] ?? 0;
      fill.style.height = `${Math.min(100, 140 * v)}%`;
    }
  }

  setStale(stale: boolean): void {
    this.staleTag.style.visibility = stale ? "visible" : "hidden";
  }

  toast(text: string): void {
    const t = el("div", "toast", text);
    this.toastBox.appendChild(t);
    setTimeout(() => t.remove(), 4000);
  }

  /** Offline disables everything; stopped leaves only Start live. */
  private applyGating(): void {
    const lockAll = !this.online;
    this.startBtn.disabled = lockAll;
    for (const c of this.controls) c.disabled = lockAll || !this.running;
  }
}
