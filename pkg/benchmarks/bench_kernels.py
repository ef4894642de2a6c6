#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times each audio inner loop in isolation and then a fully loaded
Engine.render_block, on both backends, and reports per-call medians,
speedups, and headroom against the block deadline. Run from anywhere:

    python3 benchmarks/bench_kernels.py [--blocks N] [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from somaphone import assets
from somaphone.dsp import load_kernels
from somaphone.dsp.engine import Engine, EngineConfig
from somaphone.mapping import (ChoirVoiceParams, GrainParams, ParamFrame,
                               Section, TapeLineParams)

SR = 48000
N = 128


def _median_call(fn, repeats: int, inner: int) -> float:
    """Median seconds per call of fn, measured over `repeats` batches."""
    times = np.empty(repeats)
    for r in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        times[r] = (time.perf_counter() - t0) / inner
    return float(np.median(times))


def bench_kernels(k, repeats: int, inner: int) -> dict:
    rng = np.random.default_rng(7)
    src = rng.standard_normal(SR * 4).astype(np.float32)
    ring_len = 1 << 15
    ring = rng.standard_normal(ring_len).astype(np.float32)
    out = np.zeros(N, dtype=np.float32)
    bus = np.zeros(N, dtype=np.float32)
    window = 0.1 * SR

    results = {}

    def sampler():
        out[:] = 0.0
        k.sampler_read(src, 1000.0, 1.25, 1.26, 0.5, 0.5, True, out)
    results["sampler_read"] = _median_call(sampler, repeats, inner)

    def shift():
        out[:] = 0.0
        k.choir_voice_shift(ring, 4096, window, 0.3,
                            1.26, 1.26, 240.0, 240.0, 0.7, 0.7, out)
    results["choir_voice_shift"] = _median_call(shift, repeats, inner)

    def direct():
        out[:] = 0.0
        k.choir_voice_direct(ring, 4096, 240.0, 240.0, 0.7, 0.7, out)
    results["choir_voice_direct"] = _median_call(direct, repeats, inner)

    def grain():
        bus[:] = 0.0
        k.grain_segment(src, bus, 0, N, 512.0, 1.5, 0, 4800, 0.8)
    results["grain_segment"] = _median_call(grain, repeats, inner)

    t = rng.standard_normal(N).astype(np.float32)
    c = rng.standard_normal(N).astype(np.float32)
    g = rng.standard_normal(N).astype(np.float32)
    lv = rng.standard_normal(N).astype(np.float32)

    def mix():
        k.mix_and_limit(t, c, g, lv, 1.0, 1.0, out)
    results["mix_and_limit"] = _median_call(mix, repeats, inner)

    return results


def bench_engine(k, repeats: int, inner: int) -> float:
    """Median render_block time with every stage forced on."""
    lines = [assets.placeholder_line(i, 8.0, SR) for i in range(4)]
    grain_src = assets.placeholder_breath(6.0, SR, seed=0x6A11)
    live = assets.placeholder_breath(8.0, SR, seed=0x5E57)
    eng = Engine(EngineConfig(), lines, grain_src, live_loop=live, seed=3,
                 kernels=k, force_all_stages=True)
    eng.post_frame(ParamFrame(
        Section.QUESTIONING,
        tuple(TapeLineParams(True, 1.26, 0.6) for _ in range(4)),
        (ChoirVoiceParams(-5.0, 120.0, 0.4, 0.7),
         ChoirVoiceParams(3.0, 60.0, 0.2, 0.7),
         ChoirVoiceParams(7.0, 180.0, 0.5, 0.7),
         ChoirVoiceParams(-12.0, 240.0, 0.3, 0.7)),
        GrainParams(90.0, 0.4, 1.5, 40.0, 0.8),
        0.5))
    for _ in range(300):
        eng.render_block()
    return _median_call(eng.render_block, repeats, inner)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--blocks", type=int, default=400,
                    help="inner calls per timing batch (default 400)")
    ap.add_argument("--repeats", type=int, default=9,
                    help="timing batches per figure (default 9)")
    args = ap.parse_args(argv)

    backends = {}
    for name in ("ext", "py"):
        try:
            backends[name] = load_kernels(name)
        except ImportError:
            print(f"backend {name!r} unavailable, skipping")
    if not backends:
        print("no DSP backend importable")
        return 1

    deadline = N / SR
    per_kernel = {name: bench_kernels(k, args.repeats, args.blocks)
                  for name, k in backends.items()}
    engine_med = {name: bench_engine(k, args.repeats, args.blocks)
                  for name, k in backends.items()}

    names = list(next(iter(per_kernel.values())))
    cols = sorted(backends)
    print(f"\nblock {N} @ {SR} Hz, deadline {1e6 * deadline:.0f} us; "
          f"median us/call over {args.repeats}x{args.blocks} calls\n")
    header = f"{'kernel':<20}" + "".join(f"{c:>12}" for c in cols)
    if len(cols) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for kn in names + ["render_block"]:
        vals = {c: (per_kernel[c][kn] if kn != "render_block" else engine_med[c])
                for c in cols}
        row = f"{kn:<20}" + "".join(f"{1e6 * vals[c]:>11.2f} " for c in cols)
        if len(cols) == 2:
            row += f"{vals['py'] / vals['ext']:>9.1f}x"
        print(row)
    print()
    for c in cols:
        med = engine_med[c]
        print(f"render_block [{c}]: {1e6 * med:.1f} us "
              f"= {100 * med / deadline:.1f}% of deadline")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
