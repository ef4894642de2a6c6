"""NumPy implementations of the audio inner loops.

Mirror of the compiled extension (_kernels): same function names, same
argument conventions, results equal to within float rounding. All functions
accumulate into caller-owned buffers and keep per-call scratch in a
module-level cache, so the steady state allocates no arrays (np.take and
in-place ufuncs only; no fancy indexing, no astype copies).

Conventions shared with the extension:
  - audio buffers are float32, positions/phases are float64
  - per-block parameter ramps hit their target on the last sample:
    value[k] = v0 + (v1 - v0) * (k + 1) / n
  - reads happen at the pre-advance position (sample 0 reads the head as
    passed in), which is what makes unity-rate playback bit-exact
"""

from __future__ import annotations

import numpy as np

_TWO_PI = 2.0 * np.pi

_scratch: dict = {}
_ramps: dict = {}


def _buf(tag: str, n: int, dtype) -> np.ndarray:
    buf = _scratch.get(tag)
    if buf is None or buf.shape[0] < n:
        buf = np.empty(max(n, 512), dtype=dtype)
        _scratch[tag] = buf
    return buf[:n]


def _f8(tag, n):
    return _buf(tag, n, np.float64)


def _f4(tag, n):
    return _buf(tag, n, np.float32)


def _i8(tag, n):
    return _buf(tag, n, np.int64)


def _b1(tag, n):
    return _buf(tag, n, bool)


def _ramp01(n: int) -> np.ndarray:
    r = _ramps.get(n)
    if r is None:
        r = np.arange(1, n + 1, dtype=np.float64) / n
        _ramps[n] = r
    return r


_aranges: dict = {}


def _arange(n: int) -> np.ndarray:
    """Cached constant 0..n-1 (float64). Callers must not mutate it."""
    a = _aranges.get(n)
    if a is None:
        a = np.arange(n, dtype=np.float64)
        _aranges[n] = a
    return a


def _ramp_into(tag: str, n: int, v0: float, v1: float) -> np.ndarray:
    out = _f8(tag, n)
    np.multiply(_ramp01(n), v1 - v0, out=out)
    out += v0
    return out


def _interp_take(srcf4, i0, i1, frac, ytag: str, ttag: str) -> np.ndarray:
    """y = src[i0]*(1-frac) + src[i1]*frac without allocation."""
    n = i0.shape[0]
    s = _f4(ytag + "s", n)
    y = _f8(ytag, n)
    t = _f8(ttag, n)
    np.take(srcf4, i0, out=s)
    y[:] = s
    np.subtract(1.0, frac, out=t)
    y *= t
    np.take(srcf4, i1, out=s)
    t[:] = s
    t *= frac
    y += t
    return y


def _accumulate(out_f4, y_f8, tag: str):
    c = _f4(tag, out_f4.shape[0])
    c[:] = y_f8
    out_f4 += c


def sampler_read(src, head, rate0, rate1, gain0, gain1, looping, out):
    """Variable-rate linear-interp read of one tape line, accumulated into out.

    Returns the advanced head position (float64 samples).
    """
    n = out.shape[0]
    length = src.shape[0]

    rates = _ramp_into("sr_rates", n, rate0, rate1)
    pos = _f8("sr_pos", n)
    np.cumsum(rates, out=pos)
    new_head = head + float(pos[n - 1])
    pos -= rates
    pos += head

    gains = _ramp_into("sr_gain", n, gain0, gain1)

    if looping:
        np.mod(pos, length, out=pos)
    fl = _f8("sr_fl", n)
    np.floor(pos, out=fl)
    i0 = _i8("sr_i0", n)
    i0[:] = fl
    frac = _f8("sr_frac", n)
    np.subtract(pos, fl, out=frac)
    i1 = _i8("sr_i1", n)
    np.add(i0, 1, out=i1)
    if looping:
        np.mod(i1, length, out=i1)
    else:
        np.clip(i0, 0, length - 1, out=i0)
        np.clip(i1, 0, length - 1, out=i1)

    y = _interp_take(src, i0, i1, frac, "sr_y", "sr_t")
    if not looping:
        dead = _b1("sr_dead", n)
        np.greater_equal(pos, length, out=dead)
        y[dead] = 0.0
    y *= gains
    _accumulate(out, y, "sr_acc")
    return new_head


def choir_voice_shift(ring, write_base, window, phase,
                      ratio0, ratio1, delay0, delay1, gain0, gain1, out):
    """Dual-head modulated-delay pitch shifter for one voice.

    The ring length must be a power of two and the current input block must
    already be written starting at index write_base. delay0/delay1 are extra
    static delay in samples on top of the sweeping window. Accumulates into
    out; returns the updated phasor phase in [0, 1).
    """
    n = out.shape[0]
    mask = ring.shape[0] - 1

    rates = _ramp_into("cv_rate", n, ratio0, ratio1)
    inc = _f8("cv_inc", n)
    np.subtract(rates, 1.0, out=inc)
    inc /= window

    ph = _f8("cv_ph", n)
    np.cumsum(inc, out=ph)
    ph += phase
    new_phase = float(ph[n - 1] % 1.0)
    np.mod(ph, 1.0, out=ph)

    delays = _ramp_into("cv_del", n, delay0, delay1)
    gains = _ramp_into("cv_gain", n, gain0, gain1)

    # write position of sample k, minus static delay and a 1-sample guard
    base = _f8("cv_base", n)
    np.add(_arange(n), float(write_base), out=base)
    base -= delays
    base -= 1.0

    acc = _f8("cv_acc", n)
    acc[:] = 0.0
    phb = _f8("cv_phb", n)
    dpos = _f8("cv_dpos", n)
    fl = _f8("cv_flr", n)
    frac = _f8("cv_frc", n)
    i0 = _i8("cv_i0", n)
    i1 = _i8("cv_i1", n)
    g = _f8("cv_g", n)
    for half in (0.0, 0.5):
        np.add(ph, half, out=phb)
        np.mod(phb, 1.0, out=phb)
        # this head's delay sweeps window -> 0 as its phase rises
        np.subtract(phb, 1.0, out=dpos)
        dpos *= window
        dpos += base
        np.floor(dpos, out=fl)
        i0[:] = fl
        np.subtract(dpos, fl, out=frac)
        np.bitwise_and(i0, mask, out=i0)
        np.add(i0, 1, out=i1)
        np.bitwise_and(i1, mask, out=i1)
        y = _interp_take(ring, i0, i1, frac, "cv_y", "cv_t")
        # Hann gain, zero exactly where this head's delay jumps
        np.multiply(phb, _TWO_PI, out=g)
        np.cos(g, out=g)
        np.subtract(1.0, g, out=g)
        g *= 0.5
        y *= g
        acc += y

    acc *= gains
    _accumulate(out, acc, "cv_out")
    return new_phase


def choir_voice_direct(ring, write_base, delay0, delay1, gain0, gain1, out):
    """Plain fractional-delay read (ratio exactly 1, no variation)."""
    n = out.shape[0]
    mask = ring.shape[0] - 1

    delays = _ramp_into("cd_del", n, delay0, delay1)
    gains = _ramp_into("cd_gain", n, gain0, gain1)

    pos = _f8("cd_pos", n)
    np.add(_arange(n), float(write_base), out=pos)
    pos -= delays

    fl = _f8("cd_flr", n)
    np.floor(pos, out=fl)
    i0 = _i8("cd_i0", n)
    i0[:] = fl
    frac = _f8("cd_frc", n)
    np.subtract(pos, fl, out=frac)
    np.bitwise_and(i0, mask, out=i0)
    i1 = _i8("cd_i1", n)
    np.add(i0, 1, out=i1)
    np.bitwise_and(i1, mask, out=i1)

    y = _interp_take(ring, i0, i1, frac, "cd_y", "cd_t")
    y *= gains
    _accumulate(out, y, "cd_out")


def grain_segment(src, out, offset, count, src_pos, rate, env_idx, glen, amp):
    """Render `count` samples of one Hann-enveloped grain into out[offset:].

    Returns (advanced src_pos, advanced env_idx). Source reads are clamped
    to the buffer, so adversarial positions cannot escape it.
    """
    n = count
    length = src.shape[0]

    pos = _f8("gr_pos", n)
    np.multiply(_arange(n), rate, out=pos)
    pos += src_pos
    np.clip(pos, 0.0, length - 1.0, out=pos)

    fl = _f8("gr_flr", n)
    np.floor(pos, out=fl)
    i0 = _i8("gr_i0", n)
    i0[:] = fl
    frac = _f8("gr_frc", n)
    np.subtract(pos, fl, out=frac)
    i1 = _i8("gr_i1", n)
    np.add(i0, 1, out=i1)
    np.clip(i1, 0, length - 1, out=i1)

    y = _interp_take(src, i0, i1, frac, "gr_y", "gr_t")

    env = _f8("gr_env", n)
    np.add(_arange(n), float(env_idx), out=env)
    env *= _TWO_PI / max(glen - 1, 1)
    np.cos(env, out=env)
    np.subtract(1.0, env, out=env)
    env *= 0.5 * amp
    y *= env
    _accumulate(out[offset:offset + n], y, "gr_out")
    return src_pos + rate * n, env_idx + n


def mix_and_limit(tape, choir, grain, live, master0, master1, out):
    """Sum the four buses, ramp master gain, soft-clip above +/-0.5.

    Below |0.5| the limiter is exactly the identity; above, the overshoot
    is squashed through tanh so output magnitude stays strictly under 1.
    """
    n = out.shape[0]
    np.add(tape, choir, out=out)
    out += grain
    out += live

    mr = _ramp_into("mx_r", n, master0, master1)
    m = _f4("mx_m", n)
    m[:] = mr
    out *= m

    a = _f4("mx_abs", n)
    np.abs(out, out=a)
    hot = _b1("mx_hot", n)
    np.greater(a, 0.5, out=hot)
    if hot.any():
        t = _f4("mx_t", n)
        np.subtract(a, 0.5, out=t)
        t *= 2.0
        np.tanh(t, out=t)
        t *= 0.5
        t += 0.5
        s = _f4("mx_sgn", n)
        np.sign(out, out=s)
        s *= t
        np.copyto(out, s, where=hot)
