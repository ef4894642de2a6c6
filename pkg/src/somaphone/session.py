"""Session recording: a directory of plain files, one concern per file.

    breath.csv   t,p1,p2,p3,p4           every control tick (100 Hz)
    events.csv   t,kind,a,b              boundaries, cues, status changes
    params.csv   decimated ParamFrame keyframes, flat columns
    meta.json    seed, config hash, rates, calibration window

Floats are written with repr(), so reading a file back reproduces the exact
binary values; that is what lets a replayed session render byte-identical
audio. Events are appended in tick order and their timestamps never
decrease.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

from .breath import PressureFrame
from .errors import EmptyLog, SomaphoneError
from .mapping import ParamFrame
from .timeline import SECTION_NAMES

BREATH_HEADER = ("t", "p1", "p2", "p3", "p4")
EVENT_HEADER = ("t", "kind", "a", "b")

EV_BOUNDARY = "boundary"
EV_CUE_IGNORED = "cue_ignored"
EV_DEGRADED = "degraded"
EV_RESTORED = "restored"
EV_TRANSPORT = "transport"


def write_breath_csv(path: str, rows) -> int:
    """Write (t, p1..p4) rows; returns the row count."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(BREATH_HEADER)
        for t, values in rows:
            w.writerow([repr(float(t))] + [repr(float(v)) for v in values])
            n += 1
    return n


def read_breath_csv(path: str) -> list:
    """Read a breath track back as PressureFrames (seq renumbered from 1)."""
    frames = []
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except FileNotFoundError:
        raise SomaphoneError(f"breath track not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if [h.strip() for h in header] != list(BREATH_HEADER):
            raise SomaphoneError(
                f"breath track {path}: expected header {','.join(BREATH_HEADER)}")
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 5:
                raise SomaphoneError(f"breath track {path}: row {i} has {len(row)} fields")
            try:
                t = float(row[0])
                values = tuple(float(v) for v in row[1:5])
            except ValueError:
                raise SomaphoneError(f"breath track {path}: row {i} is not numeric") from None
            frames.append(PressureFrame(t=t, values=values, seq=i))
    return frames


def _flat_param_row(t: float, f: ParamFrame) -> list:
    row = [repr(float(t)), SECTION_NAMES[f.section]]
    for line in f.tape:
        row += [int(line.active), repr(float(line.rate)), repr(float(line.gain))]
    for v in f.choir:
        row += [repr(float(v.transpose_semitones)), repr(float(v.delay_ms)),
                repr(float(v.variation)), repr(float(v.gain))]
    g = f.grain
    row += [repr(float(g.size_ms)), repr(float(g.position)), repr(float(g.speed)),
            repr(float(g.density_hz)), repr(float(g.gain))]
    row.append(repr(float(f.live_breath_gain)))
    return row


class SessionWriter:
    """Streams one session to a directory; call close() to flush."""

    def __init__(self, directory: str, *, seed: int, config_hash: str,
                 control_rate: float, sample_rate: int,
                 calibration_floor: float, calibration_ceiling: float,
                 keyframe_stride: int = 10):
        os.makedirs(directory, exist_ok=True)
        self.directory = directory
        self.keyframe_stride = max(int(keyframe_stride), 1)
        self._meta = {
            "seed": seed,
            "config_hash": config_hash,
            "control_rate": control_rate,
            "sample_rate": sample_rate,
            "calibration": {"floor": calibration_floor, "ceiling": calibration_ceiling},
            "frames": 0,
            "events": 0,
        }
        self._breath_fh = open(os.path.join(directory, "breath.csv"),
                               "w", newline="", encoding="utf-8")
        self._breath = csv.writer(self._breath_fh)
        self._breath.writerow(BREATH_HEADER)
        self._events_fh = open(os.path.join(directory, "events.csv"),
                               "w", newline="", encoding="utf-8")
        self._events = csv.writer(self._events_fh)
        self._events.writerow(EVENT_HEADER)
        self._params_fh = open(os.path.join(directory, "params.csv"),
                               "w", newline="", encoding="utf-8")
        self._params = csv.writer(self._params_fh)
        self._tick = 0
        self._last_event_t = 0.0
        self._closed = False

    def append(self, frame: PressureFrame):
        self._breath.writerow([repr(float(frame.t))]
                              + [repr(float(v)) for v in frame.values])
        self._meta["frames"] += 1

    def event(self, t: float, kind: str, a: str = "", b: str = ""):
        t = max(float(t), self._last_event_t)  # event times never decrease
        self._last_event_t = t
        self._events.writerow([repr(t), kind, a, b])
        self._meta["events"] += 1

    def boundary(self, ev):
        self.event(ev.t, EV_BOUNDARY,
                   SECTION_NAMES[ev.from_section], SECTION_NAMES[ev.to_section])

    def keyframe(self, t: float, frame: ParamFrame):
        if self._tick % self.keyframe_stride == 0:
            self._params.writerow(_flat_param_row(t, frame))
        self._tick += 1

    def close(self):
        if self._closed:
            return
        self._closed = True
        self._breath_fh.close()
        self._events_fh.close()
        self._params_fh.close()
        with open(os.path.join(self.directory, "meta.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(self._meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass(frozen=True)
class SessionEvent:
    t: float
    kind: str
    a: str
    b: str


@dataclass(frozen=True)
class SessionLog:
    """Read-back view of a recorded session directory."""
    directory: str
    frames: tuple
    events: tuple
    meta: dict

    @property
    def boundaries(self) -> tuple:
        return tuple(e for e in self.events if e.kind == EV_BOUNDARY)

    @classmethod
    def load(cls, directory: str) -> "SessionLog":
        breath_path = os.path.join(directory, "breath.csv")
        if not os.path.isdir(directory) or not os.path.isfile(breath_path):
            raise SomaphoneError(f"not a session directory: {directory}")
        frames = tuple(read_breath_csv(breath_path))
        events = []
        events_path = os.path.join(directory, "events.csv")
        if os.path.isfile(events_path):
            with open(events_path, "r", newline="", encoding="utf-8") as fh:
                reader = csv.reader(fh)
                next(reader, None)
                for row in reader:
                    if len(row) >= 2:
                        events.append(SessionEvent(
                            t=float(row[0]), kind=row[1],
                            a=row[2] if len(row) > 2 else "",
                            b=row[3] if len(row) > 3 else ""))
        meta = {}
        meta_path = os.path.join(directory, "meta.json")
        if os.path.isfile(meta_path):
            with open(meta_path, "r", encoding="utf-8") as fh:
                meta = json.load(fh)
        return cls(directory=directory, frames=frames, events=tuple(events), meta=meta)

    def require_frames(self):
        if not self.frames:
            raise EmptyLog(f"session at {self.directory} holds no pressure frames")
