"""Signal conditioning and the three-section control mappings.

Raw pillow pressure is calibrated to [0,1], low-pass filtered, then folded
through the mapping for whichever section is active. The result is a
ParamFrame: one immutable snapshot of every synthesis parameter. Evaluation
is pure; all state lives in the caller (smoother memory, section clock).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import DegenerateRange, InvalidAssignment, SectionMismatch

EPS_CAL = 1.0          # hPa; narrower calibration spans are sensor faults
N_PILLOWS = 4
N_VOICES = 4

RATE_LO, RATE_HI = 0.25, 4.0
SIZE_LO_MS, SIZE_HI_MS = 10.0, 500.0
SPEED_LO, SPEED_HI = 0.25, 4.0
DENSITY_LO_HZ, DENSITY_HI_HZ = 2.0, 80.0


class Section(IntEnum):
    CONNECTION = 0
    DISCONNECTION = 1
    QUESTIONING = 2
    END = 3


# ---------------------------------------------------------------- calibration

@dataclass(frozen=True)
class CalibrationMap:
    """Per-pillow raw pressure extremes used to normalize readings."""

    raw_min: tuple
    raw_max: tuple

    def __post_init__(self):
        if len(self.raw_min) != N_PILLOWS or len(self.raw_max) != N_PILLOWS:
            raise ValueError("calibration needs one (min, max) pair per pillow")
        for i, (lo, hi) in enumerate(zip(self.raw_min, self.raw_max)):
            if hi - lo < EPS_CAL:
                raise DegenerateRange(
                    f"pillow {i + 1}: span {hi - lo:.3g} hPa below {EPS_CAL} hPa"
                )

    @classmethod
    def default(cls, floor: float = 1000.0, ceiling: float = 1040.0):
        return cls((floor,) * N_PILLOWS, (ceiling,) * N_PILLOWS)

    def normalize(self, values) -> np.ndarray:
        lo = np.asarray(self.raw_min, dtype=np.float64)
        hi = np.asarray(self.raw_max, dtype=np.float64)
        x = (np.asarray(values, dtype=np.float64) - lo) / (hi - lo)
        return np.clip(x, 0.0, 1.0)


def calibrate(frames) -> CalibrationMap:
    """Build a CalibrationMap from a recorded sweep of PressureFrames."""
    if len(frames) < 2:
        raise ValueError("calibration needs at least 2 frames")
    vals = np.array([f.values for f in frames], dtype=np.float64)
    return CalibrationMap(tuple(vals.min(axis=0)), tuple(vals.max(axis=0)))


# ------------------------------------------------------------------ smoothing

def smooth(x: float, state: float, alpha: float) -> float:
    """One-pole low-pass step: y = alpha*x + (1 - alpha)*state."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    return alpha * x + (1.0 - alpha) * state


class Smoother:
    """Vector one-pole low-pass with per-channel memory."""

    def __init__(self, alpha: float, channels: int = N_PILLOWS, initial: float = 0.0):
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {alpha}")
        self.alpha = alpha
        self.y = np.full(channels, initial, dtype=np.float64)

    def __call__(self, x) -> np.ndarray:
        self.y += self.alpha * (np.asarray(x, dtype=np.float64) - self.y)
        return self.y.copy()

    def reset(self, value: float = 0.0):
        self.y[:] = value


# ------------------------------------------------------------------ sections

@dataclass(frozen=True)
class TapeLineSpec:
    """One pre-recorded line: when it enters and its resting level."""

    intro_time: float
    base_gain: float = 0.5


@dataclass(frozen=True)
class ConnectionSpec:
    duration: float = 10.0
    manual_advance: bool = True
    lines: tuple = (
        TapeLineSpec(0.0), TapeLineSpec(2.0), TapeLineSpec(4.0), TapeLineSpec(6.0),
    )
    rate_span: float = 1.0
    gain_span: float = 0.5
    breath_amp: float = 0.8
    zone_weights: tuple = (0.25, 0.25, 0.25, 0.25)
    ramp_time: float | None = None    # defaults to the section duration

    section = Section.CONNECTION

    @property
    def n_lines(self) -> int:
        return len(self.lines)


@dataclass(frozen=True)
class DisconnectionSpec:
    duration: float = 10.0
    manual_advance: bool = True
    assignment: tuple = (0, 1, 2, 3)  # pillow i drives voice assignment[i]
    transpose_base: float = -12.0
    transpose_range: float = 24.0
    delay_range_ms: float = 250.0
    var_range: float = 0.5
    gate_threshold: float = 0.15
    quantize_semitones: bool = True
    n_lines: int = 4

    section = Section.DISCONNECTION

    def __post_init__(self):
        if sorted(self.assignment) != list(range(N_VOICES)):
            raise InvalidAssignment(
                f"pillow-to-voice assignment must be a bijection, got {self.assignment}"
            )


@dataclass(frozen=True)
class QuestioningSpec:
    duration: float = 10.0
    manual_advance: bool = True
    # pillows driving (size, position, speed, density), in that order
    assignment: tuple = (0, 1, 2, 3)
    size_range_ms: tuple = (SIZE_LO_MS, SIZE_HI_MS)
    speed_range: tuple = (SPEED_LO, SPEED_HI)
    density_range_hz: tuple = (DENSITY_LO_HZ, DENSITY_HI_HZ)
    grain_gain: float = 1.0
    n_lines: int = 4

    section = Section.QUESTIONING

    def __post_init__(self):
        if sorted(self.assignment) != list(range(N_PILLOWS)):
            raise InvalidAssignment(
                f"pillow-to-parameter assignment must be a bijection, got {self.assignment}"
            )


# ----------------------------------------------------------------- ParamFrame

@dataclass(frozen=True)
class TapeLineParams:
    active: bool
    rate: float
    gain: float


@dataclass(frozen=True)
class ChoirVoiceParams:
    transpose_semitones: float
    delay_ms: float
    variation: float
    gain: float


NEUTRAL_VOICE = ChoirVoiceParams(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class GrainParams:
    size_ms: float
    position: float
    speed: float
    density_hz: float
    gain: float


NEUTRAL_GRAIN = GrainParams(size_ms=100.0, position=0.0, speed=1.0,
                            density_hz=DENSITY_LO_HZ, gain=0.0)
NEUTRAL_LINE = TapeLineParams(active=False, rate=1.0, gain=0.0)


@dataclass(frozen=True)
class ParamFrame:
    section: Section
    tape: tuple
    choir: tuple
    grain: GrainParams
    live_breath_gain: float


def neutral_frame(section: Section = Section.CONNECTION, n_lines: int = 4) -> ParamFrame:
    return ParamFrame(section, (NEUTRAL_LINE,) * n_lines, (NEUTRAL_VOICE,) * N_VOICES,
                      NEUTRAL_GRAIN, 0.0)


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def _lerp(lo: float, hi: float, u: float) -> float:
    return lo + (hi - lo) * u


# ----------------------------------------------------------------- evaluators

def eval_connection(spec: ConnectionSpec, norm, t_in_section: float) -> ParamFrame:
    """Tape-manipulation regime: aggregate breath nudges rate and level.

    Control authority w ramps 0 to 1 across the section so the opening is
    untouched playback no matter what the body does.
    """
    if spec.section is not Section.CONNECTION:
        raise SectionMismatch(f"expected Connection spec, got {spec.section.name}")
    norm = np.asarray(norm, dtype=np.float64)
    zw = np.asarray(spec.zone_weights, dtype=np.float64)
    s = zw.sum()
    zw = zw / s if s > 0 else np.full(N_PILLOWS, 1.0 / N_PILLOWS)
    b = float(np.dot(zw, norm))

    ramp = spec.ramp_time if spec.ramp_time is not None else spec.duration
    w = _clamp(t_in_section / ramp, 0.0, 1.0) if ramp > 0 else 1.0

    rate = _clamp(1.0 + w * (b - 0.5) * spec.rate_span, RATE_LO, RATE_HI)
    lines = []
    for line in spec.lines:
        if t_in_section >= line.intro_time:
            gain = _clamp(line.base_gain + w * b * spec.gain_span, 0.0, 1.0)
            lines.append(TapeLineParams(True, rate, gain))
        else:
            lines.append(NEUTRAL_LINE)

    return ParamFrame(
        section=Section.CONNECTION,
        tape=tuple(lines),
        choir=(NEUTRAL_VOICE,) * N_VOICES,
        grain=NEUTRAL_GRAIN,
        live_breath_gain=_clamp(spec.breath_amp * b, 0.0, 1.0),
    )


def eval_disconnection(spec: DisconnectionSpec, norm) -> ParamFrame:
    """One-to-many regime: each pillow owns one choir voice outright."""
    if spec.section is not Section.DISCONNECTION:
        raise SectionMismatch(f"expected Disconnection spec, got {spec.section.name}")
    norm = np.asarray(norm, dtype=np.float64)
    voices = [NEUTRAL_VOICE] * N_VOICES
    theta = spec.gate_threshold
    for pillow in range(N_PILLOWS):
        x = float(norm[pillow])
        semis = x * spec.transpose_range + spec.transpose_base
        if spec.quantize_semitones:
            semis = float(math.floor(semis + 0.5))
        gain = 0.0 if x < theta else _clamp((x - theta) / (1.0 - theta), 0.0, 1.0)
        voices[spec.assignment[pillow]] = ChoirVoiceParams(
            transpose_semitones=semis,
            delay_ms=x * spec.delay_range_ms,
            variation=_clamp(x * spec.var_range, 0.0, 1.0),
            gain=gain,
        )
    return ParamFrame(
        section=Section.DISCONNECTION,
        tape=(NEUTRAL_LINE,) * spec.n_lines,
        choir=tuple(voices),
        grain=NEUTRAL_GRAIN,
        live_breath_gain=0.0,
    )


def eval_questioning(spec: QuestioningSpec, norm) -> ParamFrame:
    """Granular regime: pillows drive size, position, speed and density."""
    if spec.section is not Section.QUESTIONING:
        raise SectionMismatch(f"expected Questioning spec, got {spec.section.name}")
    norm = np.asarray(norm, dtype=np.float64)
    a, b, c, d = spec.assignment
    grain = GrainParams(
        size_ms=_lerp(*spec.size_range_ms, float(norm[a])),
        position=_clamp(float(norm[b]), 0.0, 1.0),
        speed=_lerp(*spec.speed_range, float(norm[c])),
        density_hz=_lerp(*spec.density_range_hz, float(norm[d])),
        gain=_clamp(spec.grain_gain, 0.0, 1.0),
    )
    return ParamFrame(
        section=Section.QUESTIONING,
        tape=(NEUTRAL_LINE,) * spec.n_lines,
        choir=(NEUTRAL_VOICE,) * N_VOICES,
        grain=grain,
        live_breath_gain=0.0,
    )


def evaluate(spec, norm, t_in_section: float) -> ParamFrame:
    """Dispatch to the active section's evaluator."""
    if spec.section is Section.CONNECTION:
        return eval_connection(spec, norm, t_in_section)
    if spec.section is Section.DISCONNECTION:
        return eval_disconnection(spec, norm)
    if spec.section is Section.QUESTIONING:
        return eval_questioning(spec, norm)
    raise SectionMismatch(f"no evaluator for section {spec.section!r}")
