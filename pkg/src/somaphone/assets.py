"""Audio asset loading and deterministic placeholder synthesis.

Scenes may reference WAV files for the pre-recorded tape lines, the grain
source, and the stand-in live input, or leave any of them null. Null entries
are filled with synthesized placeholders so a bare scene file is playable
out of the box. Placeholders are pure functions of (slot index, duration,
sample rate): no RNG state leaks between builds, so renders stay
reproducible.
"""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile
from scipy.signal import lfilter, resample_poly

from .errors import MissingAsset

# Dm7 voicing, one root per tape line; wraps for scenes with more lines.
_LINE_MIDI = (50, 53, 57, 60)

_PEAK = 0.35


def midi_to_hz(note: float) -> float:
    return 440.0 * 2.0 ** ((note - 69.0) / 12.0)


def load_wav(path: str, sample_rate: int) -> np.ndarray:
    """Read a WAV as mono float32 at the engine rate.

    Integer formats are rescaled to [-1, 1]; multichannel files are averaged
    down; off-rate files are resampled.
    """
    try:
        sr, data = wavfile.read(path)
    except FileNotFoundError:
        raise MissingAsset(f"audio file not found: {path}") from None
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    else:
        x = data.astype(np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    if sr != sample_rate:
        x = resample_poly(x, sample_rate, sr)
    return np.ascontiguousarray(x, dtype=np.float32)


def write_wav(path: str, data: np.ndarray, sample_rate: int):
    """Write mono float32 WAV. Byte-deterministic for equal inputs."""
    wavfile.write(path, sample_rate, np.asarray(data, dtype=np.float32))


def _swell(n: int, sr: int, hz: float, lo: float = 0.35) -> np.ndarray:
    t = np.arange(n, dtype=np.float64) / sr
    return lo + (1.0 - lo) * 0.5 * (1.0 - np.cos(2.0 * np.pi * hz * t))


def placeholder_line(index: int, duration: float, sample_rate: int) -> np.ndarray:
    """Synthesized stand-in for one recorded voice line.

    A small harmonic stack on a per-line root with slow vibrato and an
    amplitude swell; distinct per index, identical across builds.
    """
    n = max(int(round(duration * sample_rate)), sample_rate // 10)
    sr = sample_rate
    t = np.arange(n, dtype=np.float64) / sr
    f0 = midi_to_hz(_LINE_MIDI[index % len(_LINE_MIDI)] + 12 * (index // len(_LINE_MIDI)))
    vib = 1.0 + 0.003 * np.sin(2.0 * np.pi * (4.5 + 0.3 * index) * t)
    phase = np.cumsum(f0 * vib) * (2.0 * np.pi / sr)
    out = np.zeros(n, dtype=np.float64)
    for k in range(1, 7):
        out += np.sin(phase * k + 0.7 * index * k) / k ** 1.3
    out *= _swell(n, sr, 0.1 + 0.02 * index)
    peak = np.abs(out).max()
    if peak > 0.0:
        out *= _PEAK / peak
    return out.astype(np.float32)


def placeholder_breath(duration: float, sample_rate: int, seed: int = 0x5E57) -> np.ndarray:
    """Synthesized breathy texture used as the default grain source and as
    the stand-in live input for offline renders.

    Band-limited noise under a breath-period envelope. Seeded generator,
    fresh per call: the output depends only on the arguments.
    """
    n = max(int(round(duration * sample_rate)), sample_rate // 10)
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal(n)
    # one-pole lowpass around 1.2 kHz for a soft, airy band
    alpha = float(np.exp(-2.0 * np.pi * 1200.0 / sample_rate))
    y = lfilter([1.0 - alpha], [1.0, -alpha], x)
    y *= _swell(n, sample_rate, 0.25, lo=0.15)
    peak = np.abs(y).max()
    if peak > 0.0:
        y *= _PEAK / peak
    return y.astype(np.float32)
