"""Scene configuration: one JSON file describing a whole performance.

An empty object is a valid scene; every omitted field takes the documented
default below. Unknown keys are rejected (they are almost always typos), and
every validation error names the offending field path.

Schema (defaults shown):

    {
      "seed": 0,
      "simulator": {
        "noise_amp": 0.05,          sensor noise amplitude, hPa
        "placement": [0, 1, 2, 3],  zone-to-pillow bijection
        "fatigue_rate": 0.0111...,  fatigue units per second at effort 1
        "fatigue_acceleration": 1.0,
        "inhale_frac": 0.4,
        "depth": 0.7,               initial breathing depth
        "breath_rate_hz": 0.25,     initial breaths per second
        "zone_bias": [0.25, 0.25, 0.25, 0.25]
      },
      "calibration": {"floor": 1000.0, "ceiling": 1040.0},
      "smoothing_alpha": 0.1,       per-tick one-pole on normalized pressure
      "sections": {
        "connection":    {"duration": 10.0, "manual_advance": true,
                          "rate_span": 1.0, "gain_span": 0.5,
                          "breath_amp": 0.8, "ramp_time": null,
                          "zone_weights": [0.25, 0.25, 0.25, 0.25]},
        "disconnection": {"duration": 10.0, "manual_advance": true,
                          "assignment": [0, 1, 2, 3],
                          "transpose_base": -12.0, "transpose_range": 24.0,
                          "delay_range_ms": 250.0, "var_range": 0.5,
                          "gate_threshold": 0.15, "quantize_semitones": true},
        "questioning":   {"duration": 10.0, "manual_advance": true,
                          "assignment": [0, 1, 2, 3],
                          "size_range_ms": [10.0, 500.0],
                          "speed_range": [0.25, 4.0],
                          "density_range_hz": [2.0, 80.0],
                          "grain_gain": 1.0}
      },
      "tape": {
        "lines": [  four entries; "file": null synthesizes a placeholder
          {"file": null, "intro_time": 0.0, "base_gain": 0.5, "duration": 8.0},
          {"file": null, "intro_time": 2.0, "base_gain": 0.5, "duration": 8.0},
          {"file": null, "intro_time": 4.0, "base_gain": 0.5, "duration": 8.0},
          {"file": null, "intro_time": 6.0, "base_gain": 0.5, "duration": 8.0}
        ],
        "grain_source": null,       WAV path or null for a placeholder
        "live_loop": null           stand-in live input for offline renders
      },
      "engine": {"sample_rate": 48000, "block_size": 128, "window_ms": 100.0,
                 "max_delay_ms": 260.0, "max_grains": 256, "master_gain": 1.0,
                 "detune_span_semitones": 0.3, "delay_jitter_ms": 12.0,
                 "mod_smoothing": 0.05, "position_jitter": 0.05},
      "io": {"osc_in_port": 9000, "osc_out_port": null,
             "osc_host": "127.0.0.1", "ws_port": 8765, "audio": "none"}
    }

File paths are resolved relative to the scene file's directory and must
exist at load time.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .breath import CONTROL_RATE, FATIGUE_RATE, INHALE_FRAC, NOISE_AMP
from .dsp.engine import EngineConfig
from .errors import MissingAsset, SceneError
from .mapping import (
    CalibrationMap,
    ConnectionSpec,
    DisconnectionSpec,
    QuestioningSpec,
    TapeLineSpec,
)

_SIM_DEFAULTS = {
    "noise_amp": NOISE_AMP,
    "placement": [0, 1, 2, 3],
    "fatigue_rate": FATIGUE_RATE,
    "fatigue_acceleration": 1.0,
    "inhale_frac": INHALE_FRAC,
    "depth": 0.7,
    "breath_rate_hz": 0.25,
    "zone_bias": [0.25, 0.25, 0.25, 0.25],
}

_CONNECTION_DEFAULTS = {
    "duration": 10.0,
    "manual_advance": True,
    "rate_span": 1.0,
    "gain_span": 0.5,
    "breath_amp": 0.8,
    "ramp_time": None,
    "zone_weights": [0.25, 0.25, 0.25, 0.25],
}

_DISCONNECTION_DEFAULTS = {
    "duration": 10.0,
    "manual_advance": True,
    "assignment": [0, 1, 2, 3],
    "transpose_base": -12.0,
    "transpose_range": 24.0,
    "delay_range_ms": 250.0,
    "var_range": 0.5,
    "gate_threshold": 0.15,
    "quantize_semitones": True,
}

_QUESTIONING_DEFAULTS = {
    "duration": 10.0,
    "manual_advance": True,
    "assignment": [0, 1, 2, 3],
    "size_range_ms": [10.0, 500.0],
    "speed_range": [0.25, 4.0],
    "density_range_hz": [2.0, 80.0],
    "grain_gain": 1.0,
}

_LINE_DEFAULTS = [
    {"file": None, "intro_time": 0.0, "base_gain": 0.5, "duration": 8.0},
    {"file": None, "intro_time": 2.0, "base_gain": 0.5, "duration": 8.0},
    {"file": None, "intro_time": 4.0, "base_gain": 0.5, "duration": 8.0},
    {"file": None, "intro_time": 6.0, "base_gain": 0.5, "duration": 8.0},
]

_ENGINE_DEFAULTS = {
    "sample_rate": 48000,
    "block_size": 128,
    "window_ms": 100.0,
    "max_delay_ms": 260.0,
    "max_grains": 256,
    "master_gain": 1.0,
    "detune_span_semitones": 0.3,
    "delay_jitter_ms": 12.0,
    "mod_smoothing": 0.05,
    "position_jitter": 0.05,
}

_IO_DEFAULTS = {
    "osc_in_port": 9000,
    "osc_out_port": None,
    "osc_host": "127.0.0.1",
    "ws_port": 8765,
    "audio": "none",
}

_SECTION_ORDER = ("connection", "disconnection", "questioning")


@dataclass(frozen=True)
class SimSettings:
    noise_amp: float = NOISE_AMP
    placement: tuple = (0, 1, 2, 3)
    fatigue_rate: float = FATIGUE_RATE
    fatigue_acceleration: float = 1.0
    inhale_frac: float = INHALE_FRAC
    depth: float = 0.7
    breath_rate_hz: float = 0.25
    zone_bias: tuple = (0.25, 0.25, 0.25, 0.25)


@dataclass(frozen=True)
class TapeLineAsset:
    file: str | None
    intro_time: float
    base_gain: float
    duration: float


@dataclass(frozen=True)
class IoSettings:
    osc_in_port: int = 9000
    osc_out_port: int | None = None
    osc_host: str = "127.0.0.1"
    ws_port: int = 8765
    audio: str = "none"


@dataclass(frozen=True)
class SceneConfig:
    seed: int
    sim: SimSettings
    calibration: CalibrationMap
    smoothing_alpha: float
    connection: ConnectionSpec
    disconnection: DisconnectionSpec
    questioning: QuestioningSpec
    tape: tuple
    grain_source: str | None
    live_loop: str | None
    engine: EngineConfig
    io: IoSettings
    base_dir: str
    config_hash: str
    control_rate: float = CONTROL_RATE

    @property
    def sections(self) -> tuple:
        return (self.connection, self.disconnection, self.questioning)

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.sections)


def _type_name(v) -> str:
    return type(v).__name__


def _check_keys(d: dict, allowed, where: str):
    for key in d:
        if key not in allowed:
            raise SceneError(f"unknown field '{where}{key}'", field=where + key)


def _merged(d: dict, defaults: dict, where: str) -> dict:
    _check_keys(d, defaults.keys(), where)
    out = dict(defaults)
    out.update(d)
    return out


def _num(v, where: str, lo=None, hi=None) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SceneError(f"'{where}' must be a number, got {_type_name(v)}", field=where)
    x = float(v)
    if lo is not None and x < lo:
        raise SceneError(f"'{where}' must be >= {lo}, got {x}", field=where)
    if hi is not None and x > hi:
        raise SceneError(f"'{where}' must be <= {hi}, got {x}", field=where)
    return x


def _int(v, where: str, lo=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SceneError(f"'{where}' must be an integer, got {_type_name(v)}", field=where)
    if lo is not None and v < lo:
        raise SceneError(f"'{where}' must be >= {lo}, got {v}", field=where)
    return v


def _bool(v, where: str) -> bool:
    if not isinstance(v, bool):
        raise SceneError(f"'{where}' must be a boolean, got {_type_name(v)}", field=where)
    return v


def _vec4(v, where: str) -> tuple:
    if not isinstance(v, (list, tuple)) or len(v) != 4:
        raise SceneError(f"'{where}' must be a list of 4 numbers", field=where)
    return tuple(_num(x, where) for x in v)


def _ivec4(v, where: str) -> tuple:
    if not isinstance(v, (list, tuple)) or len(v) != 4:
        raise SceneError(f"'{where}' must be a list of 4 integers", field=where)
    return tuple(_int(x, where) for x in v)


def _pair(v, where: str) -> tuple:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise SceneError(f"'{where}' must be a [low, high] pair", field=where)
    lo, hi = (_num(x, where) for x in v)
    if hi <= lo:
        raise SceneError(f"'{where}' must have low < high, got [{lo}, {hi}]", field=where)
    return (lo, hi)


def _duration(v, where: str) -> float:
    d = _num(v, where)
    if d <= 0.0:
        raise SceneError(f"'{where}' must be positive, got {d}", field=where)
    return d


def _resolve_path(p, base_dir: str, where: str) -> str | None:
    if p is None:
        return None
    if not isinstance(p, str):
        raise SceneError(f"'{where}' must be a path or null, got {_type_name(p)}", field=where)
    full = p if os.path.isabs(p) else os.path.join(base_dir, p)
    if not os.path.isfile(full):
        raise MissingAsset(f"'{where}': file does not exist: {full}")
    return full


def scene_from_dict(raw: dict, base_dir: str = ".") -> SceneConfig:
    """Validate a parsed scene and fill defaults. `{}` yields the default scene."""
    if not isinstance(raw, dict):
        raise SceneError(f"scene root must be an object, got {_type_name(raw)}")
    _check_keys(raw, ("seed", "simulator", "calibration", "smoothing_alpha",
                      "sections", "tape", "engine", "io"), "")

    seed = _int(raw.get("seed", 0), "seed", lo=0)

    sim_d = _merged(_dict_field(raw, "simulator"), _SIM_DEFAULTS, "simulator.")
    placement = _ivec4(sim_d["placement"], "simulator.placement")
    if sorted(placement) != [0, 1, 2, 3]:
        raise SceneError(
            f"'simulator.placement' must be a bijection over 0..3, got {list(placement)}",
            field="simulator.placement")
    sim = SimSettings(
        noise_amp=_num(sim_d["noise_amp"], "simulator.noise_amp", lo=0.0),
        placement=placement,
        fatigue_rate=_num(sim_d["fatigue_rate"], "simulator.fatigue_rate", lo=0.0),
        fatigue_acceleration=_num(sim_d["fatigue_acceleration"],
                                  "simulator.fatigue_acceleration", lo=0.0),
        inhale_frac=_num(sim_d["inhale_frac"], "simulator.inhale_frac", lo=0.05, hi=0.95),
        depth=_num(sim_d["depth"], "simulator.depth", lo=0.0, hi=1.0),
        breath_rate_hz=_num(sim_d["breath_rate_hz"], "simulator.breath_rate_hz", lo=0.01),
        zone_bias=_vec4(sim_d["zone_bias"], "simulator.zone_bias"),
    )

    cal_d = _merged(_dict_field(raw, "calibration"),
                    {"floor": 1000.0, "ceiling": 1040.0}, "calibration.")
    floor = _num(cal_d["floor"], "calibration.floor")
    ceiling = _num(cal_d["ceiling"], "calibration.ceiling")
    if ceiling <= floor:
        raise SceneError(
            f"'calibration' needs floor < ceiling, got [{floor}, {ceiling}]",
            field="calibration")
    calibration = CalibrationMap.default(floor, ceiling)

    alpha = _num(raw.get("smoothing_alpha", 0.1), "smoothing_alpha", lo=1e-6, hi=1.0)

    sections_d = _dict_field(raw, "sections")
    _check_keys(sections_d, _SECTION_ORDER, "sections.")
    conn_d = _merged(_dict_field(sections_d, "connection", "sections."),
                     _CONNECTION_DEFAULTS, "sections.connection.")
    disc_d = _merged(_dict_field(sections_d, "disconnection", "sections."),
                     _DISCONNECTION_DEFAULTS, "sections.disconnection.")
    ques_d = _merged(_dict_field(sections_d, "questioning", "sections."),
                     _QUESTIONING_DEFAULTS, "sections.questioning.")

    tape_d = _merged(_dict_field(raw, "tape"),
                     {"lines": _LINE_DEFAULTS, "grain_source": None, "live_loop": None},
                     "tape.")
    lines_raw = tape_d["lines"]
    if not isinstance(lines_raw, list) or not lines_raw:
        raise SceneError("'tape.lines' must be a non-empty list", field="tape.lines")
    lines = []
    for i, entry in enumerate(lines_raw):
        where = f"tape.lines[{i}]."
        if not isinstance(entry, dict):
            raise SceneError(f"'{where[:-1]}' must be an object", field=where[:-1])
        e = _merged(entry, {"file": None, "intro_time": 2.0 * i,
                            "base_gain": 0.5, "duration": 8.0}, where)
        lines.append(TapeLineAsset(
            file=_resolve_path(e["file"], base_dir, where + "file"),
            intro_time=_num(e["intro_time"], where + "intro_time", lo=0.0),
            base_gain=_num(e["base_gain"], where + "base_gain", lo=0.0, hi=1.0),
            duration=_duration(e["duration"], where + "duration"),
        ))
    grain_source = _resolve_path(tape_d["grain_source"], base_dir, "tape.grain_source")
    live_loop = _resolve_path(tape_d["live_loop"], base_dir, "tape.live_loop")

    connection = ConnectionSpec(
        duration=_duration(conn_d["duration"], "sections.connection.duration"),
        manual_advance=_bool(conn_d["manual_advance"], "sections.connection.manual_advance"),
        lines=tuple(TapeLineSpec(a.intro_time, a.base_gain) for a in lines),
        rate_span=_num(conn_d["rate_span"], "sections.connection.rate_span", lo=0.0),
        gain_span=_num(conn_d["gain_span"], "sections.connection.gain_span", lo=0.0),
        breath_amp=_num(conn_d["breath_amp"], "sections.connection.breath_amp", lo=0.0),
        zone_weights=_vec4(conn_d["zone_weights"], "sections.connection.zone_weights"),
        ramp_time=(None if conn_d["ramp_time"] is None
                   else _duration(conn_d["ramp_time"], "sections.connection.ramp_time")),
    )
    disconnection = DisconnectionSpec(
        duration=_duration(disc_d["duration"], "sections.disconnection.duration"),
        manual_advance=_bool(disc_d["manual_advance"],
                             "sections.disconnection.manual_advance"),
        assignment=_ivec4(disc_d["assignment"], "sections.disconnection.assignment"),
        transpose_base=_num(disc_d["transpose_base"], "sections.disconnection.transpose_base"),
        transpose_range=_num(disc_d["transpose_range"],
                             "sections.disconnection.transpose_range", lo=0.0),
        delay_range_ms=_num(disc_d["delay_range_ms"],
                            "sections.disconnection.delay_range_ms", lo=0.0),
        var_range=_num(disc_d["var_range"], "sections.disconnection.var_range",
                       lo=0.0, hi=1.0),
        gate_threshold=_num(disc_d["gate_threshold"],
                            "sections.disconnection.gate_threshold", lo=0.0, hi=0.99),
        quantize_semitones=_bool(disc_d["quantize_semitones"],
                                 "sections.disconnection.quantize_semitones"),
        n_lines=len(lines),
    )
    questioning = QuestioningSpec(
        duration=_duration(ques_d["duration"], "sections.questioning.duration"),
        manual_advance=_bool(ques_d["manual_advance"],
                             "sections.questioning.manual_advance"),
        assignment=_ivec4(ques_d["assignment"], "sections.questioning.assignment"),
        size_range_ms=_pair(ques_d["size_range_ms"], "sections.questioning.size_range_ms"),
        speed_range=_pair(ques_d["speed_range"], "sections.questioning.speed_range"),
        density_range_hz=_pair(ques_d["density_range_hz"],
                               "sections.questioning.density_range_hz"),
        grain_gain=_num(ques_d["grain_gain"], "sections.questioning.grain_gain", lo=0.0),
        n_lines=len(lines),
    )

    eng_d = _merged(_dict_field(raw, "engine"), _ENGINE_DEFAULTS, "engine.")
    try:
        engine = EngineConfig(
            sample_rate=_int(eng_d["sample_rate"], "engine.sample_rate"),
            block_size=_int(eng_d["block_size"], "engine.block_size"),
            window_ms=_num(eng_d["window_ms"], "engine.window_ms", lo=5.0),
            max_delay_ms=_num(eng_d["max_delay_ms"], "engine.max_delay_ms", lo=0.0),
            max_grains=_int(eng_d["max_grains"], "engine.max_grains", lo=8),
            master_gain=_num(eng_d["master_gain"], "engine.master_gain", lo=0.0),
            detune_span_semitones=_num(eng_d["detune_span_semitones"],
                                       "engine.detune_span_semitones", lo=0.0),
            delay_jitter_ms=_num(eng_d["delay_jitter_ms"], "engine.delay_jitter_ms", lo=0.0),
            mod_smoothing=_num(eng_d["mod_smoothing"], "engine.mod_smoothing",
                               lo=0.0, hi=1.0),
            position_jitter=_num(eng_d["position_jitter"], "engine.position_jitter",
                                 lo=0.0, hi=0.5),
        )
    except ValueError as exc:
        raise SceneError(f"'engine': {exc}", field="engine") from None

    io_d = _merged(_dict_field(raw, "io"), _IO_DEFAULTS, "io.")
    audio = io_d["audio"]
    if audio not in ("none", "auto"):
        raise SceneError(f"'io.audio' must be \"none\" or \"auto\", got {audio!r}",
                         field="io.audio")
    io = IoSettings(
        osc_in_port=_int(io_d["osc_in_port"], "io.osc_in_port", lo=0),
        osc_out_port=(None if io_d["osc_out_port"] is None
                      else _int(io_d["osc_out_port"], "io.osc_out_port", lo=1)),
        osc_host=io_d["osc_host"],
        ws_port=_int(io_d["ws_port"], "io.ws_port", lo=0),
        audio=audio,
    )

    cfg_hash = _hash_resolved(seed, sim, floor, ceiling, alpha,
                              conn_d, disc_d, ques_d, lines, eng_d, io_d)
    return SceneConfig(
        seed=seed, sim=sim, calibration=calibration, smoothing_alpha=alpha,
        connection=connection, disconnection=disconnection, questioning=questioning,
        tape=tuple(lines), grain_source=grain_source, live_loop=live_loop,
        engine=engine, io=io, base_dir=base_dir, config_hash=cfg_hash,
    )


def _dict_field(raw: dict, key: str, prefix: str = "") -> dict:
    v = raw.get(key, {})
    if not isinstance(v, dict):
        raise SceneError(f"'{prefix}{key}' must be an object, got {_type_name(v)}",
                         field=prefix + key)
    return v


def _hash_resolved(seed, sim, floor, ceiling, alpha,
                   conn_d, disc_d, ques_d, lines, eng_d, io_d) -> str:
    resolved = {
        "seed": seed,
        "simulator": {k: getattr(sim, k) for k in _SIM_DEFAULTS},
        "calibration": {"floor": floor, "ceiling": ceiling},
        "smoothing_alpha": alpha,
        "sections": {"connection": conn_d, "disconnection": disc_d,
                     "questioning": ques_d},
        "tape": [{"file": a.file and os.path.basename(a.file),
                  "intro_time": a.intro_time, "base_gain": a.base_gain,
                  "duration": a.duration} for a in lines],
        "engine": eng_d,
        "io": io_d,
    }
    blob = json.dumps(resolved, sort_keys=True, default=list).encode()
    return hashlib.sha256(blob).hexdigest()


def load_scene(path: str) -> SceneConfig:
    """Load, validate and default-fill a scene JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise SceneError(f"scene file not found: {path}") from None
    except OSError as exc:
        raise SceneError(f"cannot read scene file {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(
            f"scene parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    return scene_from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))
