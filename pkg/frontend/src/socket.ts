/** Reconnecting WebSocket link to the engine bridge.
 *
 * The link owns connection state and nothing else. On loss it retries on
 * a short backoff ladder (capped at 2 s, so an engine restart is picked
 * up within 5 s without a reload) and resets the ladder after a
 * connection that actually opened.
 */

export type LinkStatus = "connecting" | "online" | "offline";

export const BACKOFF_MS = [250, 500, 1000, 2000];
export const BACKOFF_CAP_MS = 2000;

export function backoffDelay(attempt: number): number {
  if (attempt < BACKOFF_MS.length) return BACKOFF_MS[attempt];
  return BACKOFF_CAP_MS;
}

/** The subset of the WebSocket API the link uses; tests substitute fakes. */
export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  readyState: number;
  send(data: string): void;
  close(): void;
}

export interface LinkClock {
  setTimeout(fn: () => void, ms: number): unknown;
  clearTimeout(handle: unknown): void;
}

const realClock: LinkClock = {
  setTimeout: (fn, ms) => setTimeout(fn, ms),
  clearTimeout: (h) => clearTimeout(h as ReturnType<typeof setTimeout>),
};

const OPEN = 1;

export class ConsoleLink {
  onMessage: (data: unknown) => void = () => {};
  onStatus: (status: LinkStatus) => void = () => {};

  private sock: SocketLike | null = null;
  private attempt = 0;
  private timer: unknown = null;
  private closed = false;
  private status: LinkStatus = "offline";

  constructor(
    private url: string,
    private factory: (url: string) => SocketLike = (u) =>
      new WebSocket(u) as unknown as SocketLike,
    private clock: LinkClock = realClock,
  ) {}

  get currentStatus(): LinkStatus {
    return this.status;
  }

  connect(): void {
    if (this.closed || this.sock) return;
    this.setStatus("connecting");
    let sock: SocketLike;
    try {
      sock = this.factory(this.url);
    } catch {
      this.scheduleRetry();
      return;
    }
    this.sock = sock;
    sock.onopen = () => {
      this.attempt = 0;
      this.setStatus("online");
    };
    sock.onmessage = (ev) => {
      let parsed: unknown;
      try {
        parsed = JSON.parse(String(ev.data));
      } catch {
        return; // not ours to crash on
      }
      this.onMessage(parsed);
    };
    sock.onerror = () => {
      // some runtimes fire error without close; close() forces the path
      try {
        sock.close();
      } catch {
        /* already closing */
      }
    };
    sock.onclose = () => {
      if (this.sock === sock) this.sock = null;
      if (!this.closed) this.scheduleRetry();
    };
  }

  /** True if the frame was handed to an open socket. */
  send(obj: unknown): boolean {
    if (!this.sock || this.sock.readyState !== OPEN) return false;
    try {
      this.sock.send(JSON.stringify(obj));
      return true;
    } catch {
      return false;
    }
  }

  close(): void {
    this.closed = true;
    if (this.timer !== null) this.clock.clearTimeout(this.timer);
    this.timer = null;
    if (this.sock) {
      const s = this.sock;
      this.sock = null;
      try {
        s.close();
      } catch {
        /* ignored */
      }
    }
    this.setStatus("offline");
  }

  private scheduleRetry(): void {
    if (this.closed || this.timer !== null) return;
    this.setStatus("offline");
    const delay = backoffDelay(this.attempt);
    this.attempt += 1;
    this.timer = this.clock.setTimeout(() => {
      this.timer = null;
      this.connect();
    }, delay);
  }

  private setStatus(s: LinkStatus): void {
    if (s !== this.status) {
      this.status = s;
      this.onStatus(s);
    }
  }
}
