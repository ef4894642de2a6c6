"""Performance runtime: simulator -> conditioning -> mapping -> engine.

One deterministic, sample-clocked loop is shared by every mode. Control
ticks run at 100 Hz against the audio sample clock (a tick fires whenever
its sample position has been reached by the block renderer), so a given
(scene, breath track, seed) triple always produces the same tick schedule
and therefore the same audio, whether frames come from the internal
simulator, a CSV, or a recorded session.

Live mode wraps the same pieces in threads: a control thread paced by the
wall clock, an optional audio output stream, and a command mailbox for the
console bridge. Audio never waits on control, network, or logging work; it
only ever reads the newest ParamFrame from the engine's mailbox.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import assets
from .breath import (
    BodyState,
    BreathControls,
    BreathSimulator,
    PillowParams,
    PressureFrame,
)
from .dsp.engine import Engine
from .errors import SomaphoneError, TrackTooShort
from .gateway import OscGateway
from .mapping import Section, Smoother, evaluate, neutral_frame
from .osc import PressureReading, TransportCmd
from .osc import SectionCue as OscSectionCue
from .notation import export_notation
from .scene import SceneConfig
from .session import (
    EV_CUE_IGNORED,
    EV_DEGRADED,
    EV_RESTORED,
    EV_TRANSPORT,
    SessionLog,
    SessionWriter,
    write_breath_csv,
)
from .timeline import SECTION_NAMES, SectionCue, TimelineState, advance_timeline

_GRAIN_SEED = 0x6A11
_LIVE_SEED = 0x5E57


def make_simulator(scene: SceneConfig) -> BreathSimulator:
    body = BodyState(depth=scene.sim.depth, rate=scene.sim.breath_rate_hz,
                     zone_weights=tuple(scene.sim.zone_bias),
                     bias=tuple(scene.sim.zone_bias))
    return BreathSimulator(
        PillowParams(),
        seed=scene.seed,
        noise_amp=scene.sim.noise_amp,
        mapping=scene.sim.placement,
        body=body,
        fatigue_acceleration=scene.sim.fatigue_acceleration,
        fatigue_rate=scene.sim.fatigue_rate,
        inhale_frac=scene.sim.inhale_frac,
    )


def build_engine(scene: SceneConfig, kernels=None, *, seed=None) -> Engine:
    """Construct the audio engine with the scene's assets loaded or
    synthesized. Deterministic for a given scene."""
    sr = scene.engine.sample_rate
    lines = []
    for i, asset in enumerate(scene.tape):
        if asset.file is not None:
            lines.append(assets.load_wav(asset.file, sr))
        else:
            lines.append(assets.placeholder_line(i, asset.duration, sr))
    if scene.grain_source is not None:
        grain_src = assets.load_wav(scene.grain_source, sr)
    else:
        grain_src = assets.placeholder_breath(6.0, sr, seed=_GRAIN_SEED)
    if scene.live_loop is not None:
        live_loop = assets.load_wav(scene.live_loop, sr)
    else:
        live_loop = assets.placeholder_breath(8.0, sr, seed=_LIVE_SEED)
    return Engine(scene.engine, tape_lines=lines, grain_source=grain_src,
                  live_loop=live_loop,
                  seed=scene.seed if seed is None else seed, kernels=kernels)


class ControlDriver:
    """Conditioning + timeline + mapping for one run.

    step() turns one PressureFrame into the ParamFrame the engine should
    ramp to next, advancing the section timeline as a side effect.
    """

    def __init__(self, scene: SceneConfig):
        self.scene = scene
        self.smoother = Smoother(scene.smoothing_alpha)
        self.state = TimelineState()
        self.specs = scene.sections
        self._idle = neutral_frame(n_lines=len(scene.tape))
        self.last_norm = np.zeros(4)

    def step(self, frame: PressureFrame, dt: float, cues=()):
        """Returns (param_frame, boundary_events, warnings)."""
        events, warnings = advance_timeline(self.state, dt, cues, self.specs)
        norm = self.smoother(self.scene.calibration.normalize(frame.values))
        self.last_norm = norm
        if self.state.finished:
            return self._idle, events, warnings
        spec = self.specs[self.state.index]
        pf = evaluate(spec, norm, self.state.t_in_section)
        return pf, events, warnings


@dataclass
class RenderResult:
    sample_rate: int
    samples: int
    ticks: int
    boundaries: tuple
    wav_path: str | None = None
    svg_path: str | None = None
    session_dir: str | None = None
    param_frames: list = field(default_factory=list)
    audio: np.ndarray | None = None


def simulate_breath(scene: SceneConfig, duration: float | None = None,
                    out_csv: str | None = None) -> list:
    """Run the breathing simulator for `duration` seconds (default: the
    scene's total length) and optionally write the track as CSV."""
    if duration is None:
        duration = scene.total_duration
    dt = 1.0 / scene.control_rate
    n = int(round(duration * scene.control_rate))
    sim = make_simulator(scene)
    controls = BreathControls(depth=scene.sim.depth, rate=scene.sim.breath_rate_hz,
                              zone_bias=tuple(scene.sim.zone_bias))
    frames = []
    for k in range(n):
        frames.append(sim.tick(dt, controls if k == 0 else None))
    if out_csv is not None:
        write_breath_csv(out_csv, ((f.t, f.values) for f in frames))
    return frames


def _ticks_needed(total_samples: int, spp: int) -> int:
    return max(1, math.ceil(total_samples / spp))


def offline_render(scene: SceneConfig, breath, out_wav: str | None = None, *,
                   session_dir: str | None = None, svg_path: str | None = None,
                   kernels=None, duration: float | None = None,
                   keep_frames: bool = False, seed: int | None = None) -> RenderResult:
    """Render a whole performance from a breath track, sample-clocked.

    `breath` is a sequence of PressureFrames covering the scene duration
    (TrackTooShort otherwise). Byte-identical outputs for identical inputs.
    """
    sr = scene.engine.sample_rate
    n = scene.engine.block_size
    spp = sr // int(scene.control_rate)
    if duration is None:
        duration = scene.total_duration
    total = int(round(duration * sr))
    breath = list(breath)
    needed = _ticks_needed(total, spp)
    if len(breath) < needed:
        raise TrackTooShort(
            f"breath track covers {len(breath)} ticks but the scene needs "
            f"{needed} ({duration:.2f} s at {scene.control_rate:.0f} Hz)")

    run_seed = scene.seed if seed is None else seed
    engine = build_engine(scene, kernels=kernels, seed=run_seed)
    driver = ControlDriver(scene)
    dt = 1.0 / scene.control_rate

    writer = None
    if session_dir is not None:
        writer = SessionWriter(
            session_dir, seed=run_seed, config_hash=scene.config_hash,
            control_rate=scene.control_rate, sample_rate=sr,
            calibration_floor=float(scene.calibration.raw_min[0]),
            calibration_ceiling=float(scene.calibration.raw_max[0]))

    frames_kept: list = []
    all_events: list = []
    buf = np.empty(total + n, dtype=np.float32)
    rendered = 0
    tick = 0
    try:
        while rendered < total:
            while tick * spp <= rendered:
                if tick >= len(breath):
                    raise TrackTooShort(
                        f"breath track exhausted at tick {tick} of {needed}")
                frame = breath[tick]
                pf, events, _ = driver.step(frame, dt)
                engine.post_frame(pf)
                all_events.extend(events)
                if writer is not None:
                    writer.append(frame)
                    for ev in events:
                        writer.boundary(ev)
                    writer.keyframe(frame.t, pf)
                if keep_frames:
                    frames_kept.append(pf)
                tick += 1
            out = engine.render_block()
            buf[rendered:rendered + n] = out
            rendered += n
    finally:
        if writer is not None:
            writer.close()

    audio = np.ascontiguousarray(buf[:total])
    if out_wav is not None:
        assets.write_wav(out_wav, audio, sr)

    svg = None
    if svg_path is not None:
        log = _memory_log(scene, breath[:tick], all_events, run_seed)
        svg = export_notation(log, svg_path)

    return RenderResult(sample_rate=sr, samples=total, ticks=tick,
                        boundaries=tuple(all_events), wav_path=out_wav,
                        svg_path=svg_path if svg is not None else None,
                        session_dir=session_dir, param_frames=frames_kept,
                        audio=audio)


def _memory_log(scene, frames, events, seed) -> SessionLog:
    from .session import SessionEvent
    evs = tuple(SessionEvent(t=ev.t, kind="boundary",
                             a=SECTION_NAMES[ev.from_section],
                             b=SECTION_NAMES[ev.to_section]) for ev in events)
    meta = {"seed": seed, "config_hash": scene.config_hash,
            "control_rate": scene.control_rate,
            "sample_rate": scene.engine.sample_rate,
            "calibration": {"floor": float(scene.calibration.raw_min[0]),
                            "ceiling": float(scene.calibration.raw_max[0])}}
    return SessionLog(directory="<memory>", frames=tuple(frames),
                      events=evs, meta=meta)


def replay_render(scene: SceneConfig, session_dir: str, **kw) -> RenderResult:
    """Re-render a recorded session: its breath track and seed through the
    standard offline path."""
    log = SessionLog.load(session_dir)
    log.require_frames()
    seed = int(log.meta.get("seed", scene.seed))
    return offline_render(scene, log.frames, seed=seed, **kw)


def run_control_loop(scene: SceneConfig, mode: str = "headless", *,
                     duration: float | None = None, breath=None,
                     session_dir: str | None = None, out_wav: str | None = None,
                     svg_path: str | None = None, kernels=None,
                     keep_frames: bool = False) -> RenderResult:
    """Drive a full session in one of three modes.

    headless: simulate breathing internally, render as fast as possible.
    replay:   use a provided breath track (or session dir path in `breath`).
    live:     wall-clocked; see LiveRuntime for the interactive surface.
    """
    if mode == "headless":
        frames = simulate_breath(scene, duration)
        return offline_render(scene, frames, out_wav, session_dir=session_dir,
                              svg_path=svg_path, kernels=kernels,
                              duration=duration, keep_frames=keep_frames)
    if mode == "replay":
        if breath is None:
            raise SomaphoneError("replay mode needs a breath track or session")
        if isinstance(breath, str):
            return replay_render(scene, breath, out_wav=out_wav,
                                 session_dir=session_dir, svg_path=svg_path,
                                 kernels=kernels, duration=duration,
                                 keep_frames=keep_frames)
        return offline_render(scene, breath, out_wav, session_dir=session_dir,
                              svg_path=svg_path, kernels=kernels,
                              duration=duration, keep_frames=keep_frames)
    if mode == "live":
        rt = LiveRuntime(scene, kernels=kernels, session_dir=session_dir)
        rt.run(duration=duration)
        return rt.result
    raise SomaphoneError(f"unknown control-loop mode: {mode!r}")


# ---------------------------------------------------------------------------
# Live runtime
# ---------------------------------------------------------------------------

STARVATION_LIMIT = 1.0   # seconds without a source frame before degraded


class LiveRuntime:
    """Wall-clocked runtime behind `perform`: control thread at 100 Hz, a
    render pump (audio device when available, timer otherwise), a command
    mailbox for the console bridge, and telemetry snapshots.

    Commands (thread-safe, last-write-wins):
      set_breath {depth, rate, zone_bias} / crush [4] / cue / transport /
      set_seed. The audio path never takes the command lock.
    """

    def __init__(self, scene: SceneConfig, *, kernels=None,
                 session_dir: str | None = None, source: str = "sim",
                 osc_port: int | None = None):
        self.scene = scene
        self.engine = build_engine(scene, kernels=kernels)
        self.driver = ControlDriver(scene)
        self.session_dir = session_dir
        self.source = source
        self._sim = make_simulator(scene) if source == "sim" else None
        self._gateway: OscGateway | None = None
        self._osc_port = osc_port if osc_port is not None else scene.io.osc_in_port
        self._lock = threading.Lock()
        self._controls = BreathControls(depth=scene.sim.depth,
                                        rate=scene.sim.breath_rate_hz,
                                        zone_bias=tuple(scene.sim.zone_bias))
        self._crush = np.zeros(4)
        self._pending_cues: list = []
        self._running = True       # transport
        self._stop = threading.Event()
        self._snapshot: dict = {}
        self._latest_osc: np.ndarray | None = None
        self._latest_osc_time = 0.0
        self._degraded = False
        self._last_frame: PressureFrame | None = None
        self._writer: SessionWriter | None = None
        self._warnings: list = []
        self.result: RenderResult | None = None
        self._render_thread: threading.Thread | None = None
        self._blocks_rendered = 0

    # -- command surface (called from the bridge / tests) ------------------

    def command(self, cmd: dict) -> dict:
        """Apply one console command; returns an ack or error dict."""
        if not isinstance(cmd, dict) or "cmd" not in cmd:
            return {"error": "command must be an object with a 'cmd' field"}
        kind = cmd["cmd"]
        try:
            if kind == "set_breath":
                with self._lock:
                    depth = cmd.get("depth")
                    rate = cmd.get("rate")
                    bias = cmd.get("zone_bias")
                    self._controls = BreathControls(
                        depth=None if depth is None else float(depth),
                        rate=None if rate is None else float(rate),
                        zone_bias=None if bias is None else tuple(float(x) for x in bias),
                    )
                return {"ok": "set_breath"}
            if kind == "crush":
                vals = cmd.get("values")
                if not isinstance(vals, (list, tuple)) or len(vals) != 4:
                    return {"error": "crush needs 'values': [4 floats]"}
                with self._lock:
                    self._crush = np.clip(np.asarray([float(v) for v in vals]), 0.0, 1.0)
                return {"ok": "crush"}
            if kind == "cue":
                target = cmd.get("goto")
                if target is not None:
                    from .timeline import NAME_TO_SECTION
                    sec = NAME_TO_SECTION.get(str(target).lower())
                    if sec is None:
                        return {"error": f"unknown section: {target!r}"}
                    cue = SectionCue(goto=sec)
                else:
                    cue = SectionCue()
                with self._lock:
                    self._pending_cues.append(cue)
                return {"ok": "cue"}
            if kind == "transport":
                action = cmd.get("action")
                if action not in ("start", "stop"):
                    return {"error": "transport needs 'action': start|stop"}
                with self._lock:
                    self._running = action == "start"
                if self._writer is not None:
                    self._writer.event(self.driver.state.t, EV_TRANSPORT, action)
                return {"ok": f"transport {action}"}
            if kind == "set_seed":
                seed = cmd.get("seed")
                if not isinstance(seed, int) or seed < 0:
                    return {"error": "set_seed needs a non-negative integer 'seed'"}
                self._reseed(seed)
                return {"ok": f"set_seed {seed}"}
            return {"error": f"unknown command: {kind!r}"}
        except (TypeError, ValueError) as exc:
            return {"error": f"bad command arguments: {exc}"}

    def _reseed(self, seed: int):
        ss = np.random.SeedSequence(seed)
        kids = ss.spawn(2)
        # atomic swaps; the render thread picks them up at the next block
        self.engine._choir_rng = np.random.Generator(np.random.PCG64(kids[0]))
        self.engine._grain_rng = np.random.Generator(np.random.PCG64(kids[1]))
        if self._sim is not None:
            with self._lock:
                self._sim = make_simulator(self.scene)

    def ingest_osc_frame(self, values):
        """Latest pressures from the OSC gateway (any thread)."""
        self._latest_osc = np.asarray(values, dtype=float)
        self._latest_osc_time = time.monotonic()

    def snapshot(self) -> dict:
        """Newest telemetry snapshot (plain dict, safe to read anywhere)."""
        return self._snapshot

    def stop(self):
        self._stop.set()

    # -- internals ----------------------------------------------------------

    def _osc_event(self, event):
        """Typed inbound events from the gateway (gateway rx thread)."""
        if isinstance(event, PressureReading):
            if self._latest_osc is None:
                self._latest_osc = np.zeros(4)
            self._latest_osc[event.pillow - 1] = event.hpa
            self._latest_osc_time = time.monotonic()
        elif isinstance(event, OscSectionCue):
            target = None
            if event.action == "goto" and event.target is not None:
                if 0 <= event.target <= int(Section.QUESTIONING):
                    target = Section(event.target)
                else:
                    return
            with self._lock:
                self._pending_cues.append(SectionCue(goto=target))
        elif isinstance(event, TransportCmd):
            with self._lock:
                self._running = event.action == "start"

    def _source_frame(self, dt: float, t: float, seq: int) -> PressureFrame | None:
        """Newest pressures, or None when the external source has nothing."""
        if self._sim is not None:
            with self._lock:
                controls = self._controls
                crush = self._crush.copy()
                self._controls = BreathControls()
            return self._sim.tick(dt, controls, crush_override=crush)
        if self._latest_osc is not None:
            return PressureFrame(t=t, values=tuple(self._latest_osc), seq=seq)
        return None

    def _publish_snapshot(self, frame: PressureFrame, fatigue: float):
        self._snapshot = {
            "v": 1,
            "t": frame.t,
            "pressures": [float(v) for v in frame.values],
            "normalized": [float(v) for v in self.driver.last_norm],
            "fatigue": fatigue,
            "section": SECTION_NAMES[self.driver.state.section],
            "meters": dict(self.engine.meters),
            "running": self._running,
            "degraded": self._degraded,
        }

    def _render_pump(self):
        """Paced renderer used when no audio device is in play: keeps the
        engine consuming frames at roughly real time."""
        n = self.scene.engine.block_size
        sr = self.scene.engine.sample_rate
        period = n / sr
        nxt = time.monotonic()
        while not self._stop.is_set():
            self.engine.render_block()
            self._blocks_rendered += 1
            nxt += period
            pause = nxt - time.monotonic()
            if pause > 0:
                time.sleep(pause)
            else:
                nxt = time.monotonic()

    def _try_audio_stream(self):
        """Open a real output device when configured and available."""
        if self.scene.io.audio != "auto":
            return None
        try:
            import sounddevice as sd
        except ImportError:
            return None
        cfg = self.scene.engine

        def callback(outdata, frames, time_info, status):
            out = self.engine.render_block()
            outdata[:, 0] = out[:frames]
            self._blocks_rendered += 1

        try:
            stream = sd.OutputStream(samplerate=cfg.sample_rate,
                                     blocksize=cfg.block_size, channels=1,
                                     dtype="float32", callback=callback)
            stream.start()
            return stream
        except Exception:
            return None

    def run(self, duration: float | None = None):
        """Blocking control loop at 100 Hz wall time."""
        scene = self.scene
        dt = 1.0 / scene.control_rate
        if self.session_dir is not None:
            self._writer = SessionWriter(
                self.session_dir, seed=scene.seed, config_hash=scene.config_hash,
                control_rate=scene.control_rate,
                sample_rate=scene.engine.sample_rate,
                calibration_floor=float(scene.calibration.raw_min[0]),
                calibration_ceiling=float(scene.calibration.raw_max[0]))

        if self.source == "osc":
            self._gateway = OscGateway(bind=(scene.io.osc_host, self._osc_port),
                                       event_sink=self._osc_event)
            self._gateway.start()

        stream = self._try_audio_stream()
        if stream is None:
            self._render_thread = threading.Thread(target=self._render_pump,
                                                   name="somaphone-render",
                                                   daemon=True)
            self._render_thread.start()

        t = 0.0
        seq = 0
        ticks = 0
        boundaries: list = []
        loop_start = time.monotonic()
        nxt = loop_start
        try:
            while not self._stop.is_set():
                if duration is not None and t >= duration:
                    break
                if self.driver.state.finished:
                    break
                with self._lock:
                    cues = self._pending_cues
                    self._pending_cues = []
                    running = self._running
                if running:
                    t += dt
                    seq += 1
                    frame = self._source_frame(dt, t, seq)
                    if self.source != "sim":
                        # degraded after 1 s without any inbound reading
                        now = time.monotonic()
                        last_arrival = max(self._latest_osc_time, loop_start)
                        starved = now - last_arrival > STARVATION_LIMIT
                        if starved and not self._degraded:
                            self._degraded = True
                            if self._writer is not None:
                                self._writer.event(t, EV_DEGRADED, "source starved")
                        elif not starved and self._degraded and frame is not None:
                            self._degraded = False
                            if self._writer is not None:
                                self._writer.event(t, EV_RESTORED, "source restored")
                    if frame is None:
                        held = self._last_frame
                        values = held.values if held is not None else (0.0,) * 4
                        frame = PressureFrame(t=t, values=values, seq=seq)
                    self._last_frame = frame
                    pf, events, warnings = self.driver.step(frame, dt, cues)
                    self.engine.post_frame(pf)
                    boundaries.extend(events)
                    ticks += 1
                    if self._writer is not None:
                        self._writer.append(frame)
                        for ev in events:
                            self._writer.boundary(ev)
                        for w in warnings:
                            self._writer.event(t, EV_CUE_IGNORED, w)
                        self._writer.keyframe(frame.t, pf)
                    fatigue = self._sim.body.fatigue if self._sim is not None else 0.0
                    self._publish_snapshot(frame, fatigue)
                else:
                    for _ in cues:
                        self._warnings.append("cue ignored: transport stopped")
                    if self._last_frame is not None:
                        fatigue = (self._sim.body.fatigue
                                   if self._sim is not None else 0.0)
                        self._publish_snapshot(self._last_frame, fatigue)
                nxt += dt
                pause = nxt - time.monotonic()
                if pause > 0:
                    time.sleep(pause)
                else:
                    nxt = time.monotonic()
        finally:
            self._stop.set()
            if stream is not None:
                stream.stop()
                stream.close()
            if self._render_thread is not None:
                self._render_thread.join(timeout=2.0)
            if self._gateway is not None:
                self._gateway.stop()
            if self._writer is not None:
                self._writer.close()
        self.result = RenderResult(
            sample_rate=scene.engine.sample_rate,
            samples=self._blocks_rendered * scene.engine.block_size,
            ticks=ticks, boundaries=tuple(boundaries),
            session_dir=self.session_dir)
