/** Fixed-capacity ring buffer.
 *
 * All trace history lives in rings so memory stays bounded no matter how
 * long the console is left open; pushing past capacity drops the oldest
 * entry.
 */

export class Ring<T> {
  private buf: (T | undefined)[];
  private head = 0; // index of the oldest element
  private count = 0;

  constructor(readonly capacity: number) {
    if (!Number.isInteger(capacity) || capacity <= 0)
      throw new RangeError("ring capacity must be a positive integer");
    this.buf = new Array(capacity);
  }

  get length(): number {
    return this.count;
  }

  push(item: T): void {
    const i = (this.head + this.count) % this.capacity;
    this.buf[i] = item;
    if (this.count < this.capacity) {
      this.count += 1;
    } else {
      this.head = (this.head + 1) % this.capacity;
    }
  }

  /** Oldest-first element at position i (0 = oldest). */
  at(i: number): T {
    if (i < 0 || i >= this.count) throw new RangeError("ring index out of range");
    return this.buf[(this.head + i) % this.capacity] as T;
  }

  last(): T | undefined {
    return this.count ? this.at(this.count - 1) : undefined;
  }

  clear(): void {
    this.head = 0;
    this.count = 0;
    this.buf.fill(undefined);
  }

  /** Oldest-first snapshot; allocates, so keep off the render path. */
  toArray(): T[] {
    const out: T[] = new Array(this.count);
    for (let i = 0; i < this.count; i += 1) out[i] = this.at(i);
    return out;
  }

  /** Drop from the front while drop(oldest) holds. */
  dropWhile(drop: (item: T) => boolean): void {
    while (this.count > 0 && drop(this.at(0))) {
      this.head = (this.head + 1) % this.capacity;
      this.count -= 1;
    }
  }

  forEach(fn: (item: T, i: number) => void): void {
    for (let i = 0; i < this.count; i += 1) fn(this.at(i), i);
  }
}

/** Telemetry arrives at 20 Hz and the trace window shows 120 s. */
export const TELEMETRY_RATE_HZ = 20;
export const WINDOW_S = 120;
export const FRAME_CAPACITY = TELEMETRY_RATE_HZ * WINDOW_S;
