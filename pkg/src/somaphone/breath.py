"""Torso breathing model and sensor-actuator pillow simulation.

Four breathing zones drive four pneumatic pillows pressed against a rigid
shell; the pillows vent when crushed and partially re-inflate when released.
The module is a pure state-transition core stepped at a fixed control rate;
it produces the 4-channel pressure telemetry that everything downstream
consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from .errors import InvalidPlacement, InvalidTimestep


class Zone(IntEnum):
    LOWER_ABDOMINALS = 0
    RIBCAGE = 1
    STERNUM = 2
    THORACOLUMBAR_FASCIA = 3


N_ZONES = 4
N_PILLOWS = 4

# Pneumatic constants (hPa / seconds). Soft-pillow plausible defaults; all
# overridable through the scene file.
P_FLOOR = 1000.0
SETPOINT = 1040.0
P_MAX = 1060.0
REINFLATE_TARGET = 1024.0   # 60% of the setpoint span: "slightly" re-inflated
K_CRUSH = 20.0              # sensed-pressure rise per unit crush at full fill
TAU_VENT = 0.8
TAU_INFLATE = 4.0
CRUSH_THRESHOLD = 0.02
NOISE_AMP = 0.05
CONTROL_RATE = 100.0

FATIGUE_RATE = 1.0 / 90.0   # ~90 s to exhaustion at effort 1, acceleration 1
FATIGUE_SHIFT_FRAC = 0.8    # share of lower-abdominal weight that can migrate up
INHALE_FRAC = 0.4           # inhale takes 40% of the cycle, exhale 60%

UNIFORM_WEIGHTS = (0.25, 0.25, 0.25, 0.25)


class BreathMode(IntEnum):
    NOSE = 0
    MOUTH = 1


def breath_waveform(phase: float, inhale_frac: float = INHALE_FRAC) -> float:
    """Raised-cosine breath cycle in [0, 1] with an asymmetric inhale/exhale split.

    The cycle rises from 0 to 1 over `inhale_frac` of the period and falls
    back over the remainder (singing exhalation is the long half).
    """
    u = (phase / (2.0 * math.pi)) % 1.0
    if u < inhale_frac:
        return 0.5 * (1.0 - math.cos(math.pi * u / inhale_frac))
    return 0.5 * (1.0 + math.cos(math.pi * (u - inhale_frac) / (1.0 - inhale_frac)))


def normalize_weights(weights) -> tuple:
    """Clamp to >= 0 and rescale to sum 1; an all-zero vector becomes uniform."""
    w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
    if w.shape != (N_ZONES,):
        raise ValueError(f"expected {N_ZONES} zone weights, got {w.shape}")
    s = w.sum()
    if s <= 0.0:
        return UNIFORM_WEIGHTS
    return tuple(w / s)


def fatigue_zone_shift(bias, fatigue: float, shift_frac: float = FATIGUE_SHIFT_FRAC) -> tuple:
    """Shift zone weights upward as fatigue grows.

    A fatigue-proportional share of the lower-abdominal weight migrates to
    the sternum (60%) and thoracolumbar fascia (40%), so the index-weighted
    centroid of activation is nondecreasing in fatigue.
    """
    w = list(bias)
    moved = float(np.clip(fatigue, 0.0, 1.0)) * shift_frac * w[Zone.LOWER_ABDOMINALS]
    w[Zone.LOWER_ABDOMINALS] -= moved
    w[Zone.STERNUM] += 0.6 * moved
    w[Zone.THORACOLUMBAR_FASCIA] += 0.4 * moved
    return tuple(w)


def zone_centroid(weights) -> float:
    """Index-weighted mean of zone activation (Lower=0 ... Thoracolumbar=3)."""
    return float(sum(i * w for i, w in enumerate(weights)))


@dataclass(frozen=True)
class BodyState:
    """Breathing state of the torso.

    `zone_weights` is the effective activation distribution (bias after the
    fatigue shift); `bias` is the raw steering target set by the controls.
    """
    phase: float = 0.0            # radians in [0, 2*pi)
    rate: float = 0.25            # breaths/second
    depth: float = 0.7            # unitless [0, 1]
    zone_weights: tuple = UNIFORM_WEIGHTS
    fatigue: float = 0.0
    mode: BreathMode = BreathMode.NOSE
    bias: tuple = UNIFORM_WEIGHTS


@dataclass
class BreathControls:
    """Control inputs for one breathing step; None keeps the current value."""
    depth: float | None = None
    rate: float | None = None
    zone_bias: tuple | None = None
    mode: BreathMode | None = None


def step_breathing_model(body: BodyState, dt: float, controls: BreathControls | None = None,
                         inhale_frac: float = INHALE_FRAC):
    """Advance the breathing cycle by dt and return (new state, zone expansions).

    expansions[i] = depth * zone_weights[i] * waveform(phase'), with
    zone_weights already attenuated for the lower zones by the fatigue shift.
    """
    if dt <= 0.0:
        raise InvalidTimestep(f"dt must be > 0, got {dt}")
    depth = body.depth
    rate = body.rate
    bias = body.bias
    mode = body.mode
    if controls is not None:
        if controls.depth is not None:
            depth = float(np.clip(controls.depth, 0.0, 1.0))
        if controls.rate is not None:
            rate = max(float(controls.rate), 1e-6)
        if controls.zone_bias is not None:
            bias = normalize_weights(controls.zone_bias)
        if controls.mode is not None:
            mode = controls.mode
    weights = fatigue_zone_shift(bias, body.fatigue)
    phase = (body.phase + 2.0 * math.pi * rate * dt) % (2.0 * math.pi)
    w = breath_waveform(phase, inhale_frac)
    expansions = np.array([depth * wz * w for wz in weights])
    new_body = replace(body, phase=phase, rate=rate, depth=depth,
                       zone_weights=weights, bias=bias, mode=mode)
    return new_body, expansions


def apply_fatigue(body: BodyState, dt: float, effort: float, acceleration: float = 1.0,
                  k_f: float = FATIGUE_RATE, shift_frac: float = FATIGUE_SHIFT_FRAC) -> BodyState:
    """Accumulate fatigue and shift the zone weights upward accordingly.

    Inputs are clamped rather than rejected; dt <= 0 is a no-op.
    """
    if dt <= 0.0:
        return body
    effort = float(np.clip(effort, 0.0, 1.0))
    acceleration = max(float(acceleration), 1.0)
    fatigue = min(1.0, body.fatigue + k_f * acceleration * effort * dt)
    weights = fatigue_zone_shift(body.bias, fatigue, shift_frac)
    return replace(body, fatigue=fatigue, zone_weights=weights)


# ---------------------------------------------------------------------------
# Pillows
# ---------------------------------------------------------------------------

class ValveMode(IntEnum):
    CLOSED = 0
    VENTING = 1


class PumpMode(IntEnum):
    OFF = 0
    INFLATING = 1


@dataclass(frozen=True)
class PillowParams:
    """Pneumatic constants shared by all pillows."""
    floor: float = P_FLOOR
    setpoint: float = SETPOINT
    p_max: float = P_MAX
    reinflate_target: float = REINFLATE_TARGET
    k_crush: float = K_CRUSH
    tau_vent: float = TAU_VENT
    tau_inflate: float = TAU_INFLATE
    crush_threshold: float = CRUSH_THRESHOLD

    def __post_init__(self):
        if not (self.floor < self.reinflate_target < self.setpoint <= self.p_max):
            raise ValueError(
                "pillow pressures must satisfy floor < reinflate_target < setpoint <= p_max")
        if self.tau_vent <= 0 or self.tau_inflate <= 0:
            raise ValueError("vent/inflate time constants must be > 0")

    @property
    def span(self) -> float:
        return self.setpoint - self.floor


@dataclass(frozen=True)
class PillowState:
    """Per-pillow pneumatic state.

    `pressure` is the sensed (barometric) value: internal air pressure plus
    the reversible compression term while crushed. `base` is the internal
    air pressure the valve/pump dynamics act on.
    """
    pressure: float
    base: float
    valve: ValveMode = ValveMode.CLOSED
    pump: PumpMode = PumpMode.OFF
    setpoint: float = SETPOINT
    reinflate_target: float = REINFLATE_TARGET


def make_pillow_state(params: PillowParams = PillowParams()) -> PillowState:
    return PillowState(pressure=params.setpoint, base=params.setpoint,
                       setpoint=params.setpoint, reinflate_target=params.reinflate_target)


def _pillow_step(base, crush, dt: float, pp: PillowParams):
    """Vectorized pillow step: returns (base', sensed, venting, inflating).

    Crush above the threshold opens the valve and the air pressure decays
    toward ambient; with no crush and a deflated pillow the pump raises it
    toward the (lower) re-inflate target. The barometer additionally sees a
    reversible compression rise k_crush * crush, scaled by the fill fraction
    so an empty pillow transmits nothing.
    """
    crush = np.clip(crush, 0.0, 1.0)
    venting = crush > pp.crush_threshold
    inflating = (~venting) & (base < pp.reinflate_target)
    kv = 1.0 - math.exp(-dt / pp.tau_vent)
    ki = 1.0 - math.exp(-dt / pp.tau_inflate)
    base = np.where(venting, base + (pp.floor - base) * kv,
                    np.where(inflating, base + (pp.reinflate_target - base) * ki, base))
    fill = (base - pp.floor) / pp.span
    sensed = np.clip(base + pp.k_crush * crush * fill, pp.floor, pp.p_max)
    return base, sensed, venting, inflating


def pillow_update(p: PillowState, crush: float, dt: float,
                  params: PillowParams = PillowParams()) -> PillowState:
    """One control step of the pillow state machine (dt <= 0 is a no-op)."""
    if dt <= 0.0:
        return p
    base, sensed, venting, inflating = _pillow_step(p.base, crush, dt, params)
    return PillowState(pressure=float(sensed), base=float(base),
                       valve=ValveMode.VENTING if venting else ValveMode.CLOSED,
                       pump=PumpMode.INFLATING if inflating else PumpMode.OFF,
                       setpoint=params.setpoint,
                       reinflate_target=params.reinflate_target)


class PillowBank:
    """A batch of pillows stepped together (the simulator uses a bank of 4).

    Vectorized over the batch so large randomized sweeps stay cheap; the
    scalar `pillow_update` shares the same `_pillow_step` core.
    """

    def __init__(self, n: int = N_PILLOWS, params: PillowParams = PillowParams()):
        self.params = params
        self.base = np.full(n, params.setpoint, dtype=float)
        self.pressure = np.full(n, params.setpoint, dtype=float)
        self.venting = np.zeros(n, dtype=bool)
        self.inflating = np.zeros(n, dtype=bool)

    def __len__(self):
        return len(self.base)

    def step(self, crush, dt: float) -> np.ndarray:
        """Advance every pillow by dt under the given crush vector."""
        if dt <= 0.0:
            return self.pressure.copy()
        crush = np.asarray(crush, dtype=float)
        self.base, self.pressure, self.venting, self.inflating = _pillow_step(
            self.base, crush, dt, self.params)
        return self.pressure.copy()

    def states(self) -> list[PillowState]:
        pp = self.params
        return [PillowState(pressure=float(self.pressure[i]), base=float(self.base[i]),
                            valve=ValveMode.VENTING if self.venting[i] else ValveMode.CLOSED,
                            pump=PumpMode.INFLATING if self.inflating[i] else PumpMode.OFF,
                            setpoint=pp.setpoint, reinflate_target=pp.reinflate_target)
                for i in range(len(self))]


# ---------------------------------------------------------------------------
# Sensing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PressureFrame:
    """Timestamped 4-channel pressure snapshot; the universal telemetry unit."""
    t: float
    values: tuple
    seq: int


class SensorChannel:
    """Barometric reading with seeded zero-mean uniform noise.

    Readings are deterministic for a given seed and call index.
    """

    def __init__(self, seed, amp: float = NOISE_AMP):
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self.amp = float(amp)

    def read(self, pressure: float) -> float:
        return float(pressure + self.amp * self._rng.uniform(-1.0, 1.0))


def sample_pressure(p: PillowState, channel: SensorChannel) -> float:
    """Sensed pressure of one pillow through its (noisy, seeded) channel."""
    return channel.read(p.pressure)


def couple_body_to_pillows(expansions, mapping) -> np.ndarray:
    """Map zone expansions onto pillow crush through the placement bijection.

    `mapping[z]` is the pillow index carrying zone z; the body pressing a
    pillow against the rigid shell makes crush equal to the zone expansion.
    """
    mapping = list(mapping)
    if sorted(mapping) != list(range(N_PILLOWS)):
        raise InvalidPlacement(f"zone-to-pillow mapping must be a bijection over 0..3, got {mapping}")
    expansions = np.asarray(expansions, dtype=float)
    crush = np.empty(N_PILLOWS, dtype=float)
    for z, pillow in enumerate(mapping):
        crush[pillow] = expansions[z]
    return crush


# ---------------------------------------------------------------------------
# Whole-torso simulator
# ---------------------------------------------------------------------------

class BreathSimulator:
    """Body + pillows + sensors stepped at the control rate.

    Pure and deterministic for a given seed and control sequence; the runtime
    drives `tick` and publishes the resulting immutable PressureFrames.
    """

    def __init__(self, params: PillowParams = PillowParams(), *, seed: int = 0,
                 noise_amp: float = NOISE_AMP, mapping=(0, 1, 2, 3),
                 body: BodyState | None = None, fatigue_acceleration: float = 1.0,
                 fatigue_rate: float = FATIGUE_RATE, inhale_frac: float = INHALE_FRAC):
        self.params = params
        self.body = body if body is not None else BodyState()
        self.bank = PillowBank(N_PILLOWS, params)
        self.mapping = list(mapping)
        if sorted(self.mapping) != list(range(N_PILLOWS)):
            raise InvalidPlacement(f"zone-to-pillow mapping must be a bijection, got {mapping}")
        seeds = np.random.SeedSequence(seed).spawn(N_PILLOWS)
        self.channels = [SensorChannel(s, noise_amp) for s in seeds]
        self.fatigue_acceleration = fatigue_acceleration
        self.fatigue_rate = fatigue_rate
        self.inhale_frac = inhale_frac
        self.t = 0.0
        self.seq = 0
        self.last_expansions = np.zeros(N_ZONES)

    def tick(self, dt: float = 1.0 / CONTROL_RATE, controls: BreathControls | None = None,
             crush_override=None) -> PressureFrame:
        """One control-rate step; returns the sensed PressureFrame."""
        self.body, expansions = step_breathing_model(self.body, dt, controls, self.inhale_frac)
        self.body = apply_fatigue(self.body, dt, effort=self.body.depth,
                                  acceleration=self.fatigue_acceleration, k_f=self.fatigue_rate)
        crush = couple_body_to_pillows(expansions, self.mapping)
        if crush_override is not None:
            crush = np.maximum(crush, np.clip(np.asarray(crush_override, dtype=float), 0.0, 1.0))
        sensed = self.bank.step(crush, dt)
        values = tuple(self.channels[i].read(sensed[i]) for i in range(N_PILLOWS))
        self.t += dt
        self.seq += 1
        self.last_expansions = expansions
        return PressureFrame(t=self.t, values=values, seq=self.seq)
