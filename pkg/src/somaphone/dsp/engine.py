"""Block-based audio engine: tape sampler, 4-voice choir, granular synth, mixer.

One Engine owns all audio state and is driven by render_block() from a
single rendering context (audio callback or offline loop). Parameter frames
arrive through a single-slot mailbox (plain attribute assignment, newest
wins) and every scalar parameter ramps linearly across the next block, so a
repeated frame is a fixed point: the second block is ramp-free.

Randomness (choir variation wander, grain clock and jitter) comes from two
generators spawned from one seed, one per stage, advanced in a fixed order.
Identical frame and input schedules therefore give bit-identical audio on a
given kernel backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..mapping import ParamFrame, Section, neutral_frame
from . import kernels as default_kernels

BLOCK_SIZES = (64, 128, 256)
SAMPLE_RATES = (44100, 48000)


@dataclass(frozen=True)
class EngineConfig:
    sample_rate: int = 48000
    block_size: int = 128
    # Crossfade window for the dual-head shifter. The splice artifact sits
    # up to 0.5*|ratio-1|*sample_rate/window away from the target partial,
    # so the window must be long enough to keep that under 2% of the target;
    # 100 ms bounds it at 2.5 Hz for an octave down and 5 Hz for an octave up.
    window_ms: float = 100.0
    max_delay_ms: float = 260.0       # static voice delay headroom
    max_grains: int = 256
    master_gain: float = 1.0
    detune_span_semitones: float = 0.3   # full-scale random detune at variation 1
    delay_jitter_ms: float = 12.0        # full-scale random delay wobble at variation 1
    mod_smoothing: float = 0.05          # per-block one-pole toward new random targets
    position_jitter: float = 0.05        # grain start wander, fraction of usable range

    def __post_init__(self):
        if self.sample_rate not in SAMPLE_RATES:
            raise ValueError(f"sample_rate must be one of {SAMPLE_RATES}")
        if self.block_size not in BLOCK_SIZES:
            raise ValueError(f"block_size must be one of {BLOCK_SIZES}")


def _pow2_at_least(n: int) -> int:
    p = 1
    while p < n:
        p <<= 1
    return p


class Engine:
    def __init__(self, config: EngineConfig, tape_lines, grain_source,
                 live_loop=None, seed: int = 0, kernels=None,
                 force_all_stages: bool = False):
        self.config = config
        self.k = kernels if kernels is not None else default_kernels
        self.force_all_stages = force_all_stages
        sr = config.sample_rate
        n = config.block_size

        self.tape = [np.ascontiguousarray(b, dtype=np.float32) for b in tape_lines]
        self.tape_looping = [True] * len(self.tape)
        self.grain_source = np.ascontiguousarray(grain_source, dtype=np.float32)
        self.live_loop = (np.ascontiguousarray(live_loop, dtype=np.float32)
                          if live_loop is not None else None)
        if self.live_loop is not None and self.live_loop.shape[0] < n:
            raise ValueError("live stand-in shorter than one block")

        self.n_lines = len(self.tape)
        self.window = config.window_ms * sr / 1000.0
        ring_len = _pow2_at_least(
            int(self.window + (config.max_delay_ms + config.delay_jitter_ms) * sr / 1000.0)
            + n + 4
        )
        self.ring = np.zeros(ring_len, dtype=np.float32)
        self.widx = 0

        # buses
        self.tape_bus = np.zeros(n, dtype=np.float32)
        self.choir_bus = np.zeros(n, dtype=np.float32)
        self.grain_bus = np.zeros(n, dtype=np.float32)
        self.live_bus = np.zeros(n, dtype=np.float32)
        self.out = np.zeros(n, dtype=np.float32)
        self._live_in = np.zeros(n, dtype=np.float32)
        self._scale = np.zeros(n, dtype=np.float32)
        self._scale8 = np.zeros(n, dtype=np.float64)
        self._ramp01 = np.arange(1, n + 1, dtype=np.float64) / n

        # applied (post-ramp) parameter state
        self._frame_ref: ParamFrame | None = None
        self._section = Section.CONNECTION
        self._line_rate = np.ones(self.n_lines, dtype=np.float64)
        self._line_gain = np.zeros(self.n_lines, dtype=np.float64)
        self._voice_ratio = np.ones(4, dtype=np.float64)
        self._voice_delay = np.zeros(4, dtype=np.float64)
        self._voice_gain = np.zeros(4, dtype=np.float64)
        self._voice_direct = [True] * 4
        self._live_gain = 0.0
        self._master = config.master_gain
        self._norm = 1.0
        self._grain_params = None

        # per-voice wander state
        self._det_state = np.zeros(4, dtype=np.float64)
        self._jit_state = np.zeros(4, dtype=np.float64)

        # playback heads
        self.heads = np.zeros(self.n_lines, dtype=np.float64)
        self.phases = np.zeros(4, dtype=np.float64)
        self._live_head = 0

        # grain slots
        m = config.max_grains
        self._g_active = np.zeros(m, dtype=bool)
        self._g_pos = np.zeros(m, dtype=np.float64)
        self._g_rate = np.zeros(m, dtype=np.float64)
        self._g_env = np.zeros(m, dtype=np.int64)
        self._g_len = np.zeros(m, dtype=np.int64)
        self._g_amp = np.zeros(m, dtype=np.float64)
        self._g_off = np.zeros(m, dtype=np.int64)
        # fixed-size slot bookkeeping: the audio thread must never grow or
        # shrink a Python list
        self._free_slots = np.arange(m - 1, -1, -1, dtype=np.int64)
        self._n_free = m
        self._live_slots = np.zeros(m, dtype=np.int64)
        self._n_live = 0
        self._next_onset: float | None = None
        self.grain_onsets = 0

        ss = np.random.SeedSequence(seed)
        kids = ss.spawn(2)
        self._choir_rng = np.random.Generator(np.random.PCG64(kids[0]))
        self._grain_rng = np.random.Generator(np.random.PCG64(kids[1]))

        self.sample_clock = 0
        self.live_missing = False
        self.meters = {"tape": 0.0, "choir": 0.0, "grain": 0.0, "live": 0.0, "master": 0.0}

        self._neutral = neutral_frame(n_lines=self.n_lines)
        self._pending_frame: ParamFrame | None = None

    # ------------------------------------------------------------- mailbox

    def post_frame(self, frame: ParamFrame):
        """Hand the newest ParamFrame to the renderer. Any thread; lock-free."""
        self._pending_frame = frame

    # -------------------------------------------------------------- render

    def render_block(self, live_block=None):
        """Render one block into self.out and return it."""
        cfg = self.config
        n = cfg.block_size
        sr = cfg.sample_rate

        frame = self._pending_frame
        first = self._frame_ref is None
        if frame is None:
            frame = self._neutral
        target = frame
        self._frame_ref = frame

        sec = target.section
        run_tape = self.force_all_stages or sec is Section.CONNECTION
        run_choir = self.force_all_stages or sec is Section.DISCONNECTION
        run_grain = self.force_all_stages or sec is Section.QUESTIONING

        # ---- live input block (needed by the live bus and the choir)
        need_live = run_tape or run_choir
        if live_block is not None:
            self._live_in[:] = live_block[:n]
        elif need_live and self.live_loop is not None:
            self._read_live_loop(n)
        else:
            self._live_in[:] = 0.0
            wants_signal = (target.live_breath_gain > 0.0
                            or (run_choir and any(v.gain > 0.0 for v in target.choir)))
            if need_live and wants_signal:
                self.live_missing = True

        # ---- tape bus
        self.tape_bus[:] = 0.0
        if run_tape:
            for i, line in enumerate(target.tape[: self.n_lines]):
                r1 = line.rate if line.active else self._line_rate[i]
                g1 = line.gain if line.active else 0.0
                r0 = r1 if first else self._line_rate[i]
                g0 = g1 if first else self._line_gain[i]
                src = self.tape[i]
                if not self.tape_looping[i] and self.heads[i] >= src.shape[0] and g1 == 0.0:
                    self._line_rate[i] = r1
                    self._line_gain[i] = g1
                    continue
                self.heads[i] = self.k.sampler_read(
                    src, self.heads[i], r0, r1, g0, g1, self.tape_looping[i], self.tape_bus
                )
                self._line_rate[i] = r1
                self._line_gain[i] = g1

        # ---- live bus
        g1 = target.live_breath_gain if (run_tape or self.force_all_stages) else 0.0
        g0 = g1 if first else self._live_gain
        if g0 != 0.0 or g1 != 0.0:
            np.multiply(self._ramp01, g1 - g0, out=self._scale8)
            self._scale8 += g0
            self._scale[:] = self._scale8
            np.multiply(self._live_in, self._scale, out=self.live_bus)
        else:
            self.live_bus[:] = 0.0
        self._live_gain = g1

        # ---- choir bus
        self.choir_bus[:] = 0.0
        if run_choir:
            self._render_choir(target, first, n, sr)
        else:
            # keep the ring current so section switches read real history
            self._write_ring(n)

        # ---- grain bus
        self.grain_bus[:] = 0.0
        if run_grain:
            self._render_grains(target.grain, n, sr)
        elif self._next_onset is not None:
            self._next_onset = None
            self._render_grains(None, n, sr)
        elif self._n_live:
            self._render_grains(None, n, sr)

        # ---- mix
        m1 = cfg.master_gain
        m0 = m1 if first else self._master
        self.k.mix_and_limit(self.tape_bus, self.choir_bus, self.grain_bus,
                             self.live_bus, m0, m1, self.out)
        self._master = m1
        self._section = sec

        self._update_meters(n)
        self.sample_clock += n
        return self.out

    # ------------------------------------------------------------- helpers

    def _read_live_loop(self, n: int):
        src = self.live_loop
        length = src.shape[0]
        pos = self._live_head
        first = min(n, length - pos)
        self._live_in[:first] = src[pos:pos + first]
        if first < n:
            self._live_in[first:] = src[:n - first]
        self._live_head = (pos + n) % length

    def _write_ring(self, n: int):
        ring = self.ring
        length = ring.shape[0]
        w = self.widx
        first = min(n, length - w)
        ring[w:w + first] = self._live_in[:first]
        if first < n:
            ring[:n - first] = self._live_in[first:]
        self.widx = (w + n) % length

    def _render_choir(self, target: ParamFrame, first: bool, n: int, sr: int):
        cfg = self.config
        write_base = self.widx
        self._write_ring(n)
        alpha = cfg.mod_smoothing
        gains_sq = 0.0
        for v in range(4):
            vp = target.choir[v]
            # fixed draw order: detune then delay wobble, every voice, every block
            rd = self._choir_rng.random() * 2.0 - 1.0
            rj = self._choir_rng.random() * 2.0 - 1.0
            self._det_state[v] += alpha * (rd - self._det_state[v])
            self._jit_state[v] += alpha * (rj - self._jit_state[v])

            base_ratio = 2.0 ** (vp.transpose_semitones / 12.0)
            det = self._det_state[v] * vp.variation * cfg.detune_span_semitones
            ratio1 = base_ratio * 2.0 ** (det / 12.0)
            jit = (self._jit_state[v] + 1.0) * 0.5 * vp.variation * cfg.delay_jitter_ms
            delay1 = (vp.delay_ms + jit) * sr / 1000.0
            gain1 = vp.gain
            ratio0 = ratio1 if first else self._voice_ratio[v]
            delay0 = delay1 if first else self._voice_delay[v]
            gain0 = gain1 if first else self._voice_gain[v]
            gains_sq += gain1 * gain1

            if gain0 == 0.0 and gain1 == 0.0:
                self.phases[v] = 0.0
            elif ratio0 == 1.0 and ratio1 == 1.0:
                self.k.choir_voice_direct(self.ring, write_base, delay0, delay1,
                                          gain0, gain1, self.choir_bus)
            else:
                self.phases[v] = self.k.choir_voice_shift(
                    self.ring, write_base, self.window, self.phases[v],
                    ratio0, ratio1, delay0, delay1, gain0, gain1, self.choir_bus,
                )
            self._voice_ratio[v] = ratio1
            self._voice_delay[v] = delay1
            self._voice_gain[v] = gain1

        norm1 = 1.0 / math.sqrt(gains_sq) if gains_sq > 1.0 else 1.0
        norm0 = norm1 if first else self._norm
        if norm0 != 1.0 or norm1 != 1.0:
            np.multiply(self._ramp01, norm1 - norm0, out=self._scale8)
            self._scale8 += norm0
            self._scale[:] = self._scale8
            self.choir_bus *= self._scale
        self._norm = norm1

    def _render_grains(self, grain, n: int, sr: int):
        block_start = self.sample_clock
        block_end = block_start + n
        cfg = self.config

        if grain is not None and grain.density_hz <= 1e-6:
            # a dead clock forgets its schedule; re-arming starts fresh
            self._next_onset = None
            grain = None
        if grain is not None:
            if self._next_onset is None:
                self._next_onset = float(block_start)
            d = grain.density_hz
            lo, hi = 0.25 / d, 4.0 / d
            while self._next_onset < block_end:
                offset = int(self._next_onset) - block_start
                if offset < 0:
                    offset = 0
                jitter_u = self._grain_rng.random()
                gap_u = self._grain_rng.random()
                self.grain_onsets += 1
                self._spawn_grain(grain, offset, jitter_u, sr)
                gap = -math.log1p(-gap_u) / d
                gap = lo if gap < lo else hi if gap > hi else gap
                self._next_onset += gap * sr

        # advance every live grain through this block, compacting finished
        # slots in place so iteration (and so summation) order is preserved
        if self._n_live:
            write = 0
            for k in range(self._n_live):
                s = int(self._live_slots[k])
                off = int(self._g_off[s])
                count = min(int(self._g_len[s] - self._g_env[s]), n - off)
                if count > 0:
                    pos, env = self.k.grain_segment(
                        self.grain_source, self.grain_bus, off, count,
                        self._g_pos[s], self._g_rate[s], int(self._g_env[s]),
                        int(self._g_len[s]), self._g_amp[s],
                    )
                    self._g_pos[s] = pos
                    self._g_env[s] = env
                self._g_off[s] = 0
                if self._g_env[s] >= self._g_len[s]:
                    self._g_active[s] = False
                    self._free_slots[self._n_free] = s
                    self._n_free += 1
                else:
                    self._live_slots[write] = s
                    write += 1
            self._n_live = write

    def _spawn_grain(self, grain, offset: int, jitter_u: float, sr: int):
        if not self._n_free:
            return
        self._n_free -= 1
        s = int(self._free_slots[self._n_free])
        glen = max(2, int(grain.size_ms * sr / 1000.0))
        usable = max(self.grain_source.shape[0] - glen, 0)
        start = grain.position * usable
        start += (jitter_u * 2.0 - 1.0) * self.config.position_jitter * usable
        start = 0.0 if start < 0.0 else usable if start > usable else start
        self._g_active[s] = True
        self._g_pos[s] = start
        self._g_rate[s] = grain.speed
        self._g_env[s] = 0
        self._g_len[s] = glen
        self._g_amp[s] = grain.gain
        self._g_off[s] = offset
        self._live_slots[self._n_live] = s
        self._n_live += 1

    def _update_meters(self, n: int):
        m = self.meters
        m["tape"] = math.sqrt(float(np.dot(self.tape_bus, self.tape_bus)) / n)
        m["choir"] = math.sqrt(float(np.dot(self.choir_bus, self.choir_bus)) / n)
        m["grain"] = math.sqrt(float(np.dot(self.grain_bus, self.grain_bus)) / n)
        m["live"] = math.sqrt(float(np.dot(self.live_bus, self.live_bus)) / n)
        m["master"] = math.sqrt(float(np.dot(self.out, self.out)) / n)

    def take_live_missing(self) -> bool:
        flag = self.live_missing
        self.live_missing = False
        return flag
