/** Outbound command pacing.
 *
 * Control gestures fire far faster than the engine needs; the sender
 * coalesces per command kind (last write wins) and releases at most
 * MAX_RATE_HZ commands per second overall, in the order kinds first
 * became pending. A failed send flags the UI stale until an ack clears
 * it.
 */

export const MAX_RATE_HZ = 30;
export const MIN_INTERVAL_MS = 1000 / MAX_RATE_HZ;

export type Command = Record<string, unknown> & { cmd: string };

export interface SenderClock {
  now(): number;
  setTimeout(fn: () => void, ms: number): unknown;
  clearTimeout(handle: unknown): void;
}

const realClock: SenderClock = {
  now: () => Date.now(),
  setTimeout: (fn, ms) => setTimeout(fn, ms),
  clearTimeout: (h) => clearTimeout(h as ReturnType<typeof setTimeout>),
};

export class CommandSender {
  private pending = new Map<string, Command>(); // insertion order = send order
  private lastSent = -Infinity;
  private timer: unknown = null;
  private stale = false;

  constructor(
    private transmit: (cmd: Command) => boolean,
    public onStale: (stale: boolean) => void = () => {},
    private clock: SenderClock = realClock,
  ) {}

  /** Queue a command; a newer command of the same kind replaces it. */
  push(cmd: Command): void {
    if (this.pending.has(cmd.cmd)) this.pending.delete(cmd.cmd);
    this.pending.set(cmd.cmd, cmd);
    this.pump();
  }

  /** Number of commands waiting for a rate slot. */
  get pendingCount(): number {
    return this.pending.size;
  }

  /** An ack from the server means the link is moving commands again. */
  acked(): void {
    this.setStale(false);
  }

  dispose(): void {
    if (this.timer !== null) this.clock.clearTimeout(this.timer);
    this.timer = null;
    this.pending.clear();
  }

  private setStale(v: boolean): void {
    if (v !== this.stale) {
      this.stale = v;
      this.onStale(v);
    }
  }

  private pump(): void {
    if (this.timer !== null) return;
    const wait = this.lastSent + MIN_INTERVAL_MS - this.clock.now();
    if (wait > 0) {
      this.timer = this.clock.setTimeout(() => {
        this.timer = null;
        this.flushOne();
      }, wait);
    } else {
      this.flushOne();
    }
  }

  private flushOne(): void {
    const first = this.pending.entries().next();
    if (first.done) return;
    const [kind, cmd] = first.value;
    this.pending.delete(kind);
    this.lastSent = this.clock.now();
    if (!this.transmit(cmd)) this.setStale(true);
    if (this.pending.size > 0) this.pump();
  }
}
