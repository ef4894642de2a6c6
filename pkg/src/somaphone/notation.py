"""Score-like SVG rendering of a recorded session.

Four stacked pressure traces (one per pillow, time left to right, normalized
pressure vertical) with purple vertical rules marking the section boundaries
and a label at the start of each section band. Output is a pure function of
the log: fixed layout, fixed float formatting, no timestamps, so the same
log always yields byte-identical SVG.

Long sessions are decimated by a uniform stride so no polyline exceeds
MAX_POINTS points.
"""

from __future__ import annotations

import math

from .errors import EmptyLog
from .session import SessionLog

BOUNDARY_COLOR = "#800080"
MAX_POINTS = 4000

_TRACE_COLORS = ("#2166ac", "#1a9850", "#d6604d", "#8073ac")

_WIDTH = 1200
_MARGIN_L = 70
_MARGIN_R = 24
_MARGIN_T = 42
_MARGIN_B = 30
_BAND_H = 90
_BAND_GAP = 14


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def notation_svg(log: SessionLog) -> str:
    """Render the notation for one session log as an SVG document string."""
    if not log.frames:
        raise EmptyLog(f"session at {log.directory} holds no pressure frames")

    frames = log.frames
    n = len(frames)
    stride = max(1, math.ceil(n / MAX_POINTS))
    idx = range(0, n, stride)

    cal = log.meta.get("calibration", {})
    floor = float(cal.get("floor", min(min(f.values) for f in frames)))
    ceiling = float(cal.get("ceiling", max(max(f.values) for f in frames)))
    span = max(ceiling - floor, 1e-9)

    t0 = frames[0].t
    t1 = frames[-1].t
    t_span = max(t1 - t0, 1e-9)
    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R

    def x_of(t: float) -> float:
        return _MARGIN_L + (t - t0) / t_span * plot_w

    n_traces = len(frames[0].values)
    height = _MARGIN_T + n_traces * _BAND_H + (n_traces - 1) * _BAND_GAP + _MARGIN_B
    rules_bottom = _MARGIN_T + n_traces * _BAND_H + (n_traces - 1) * _BAND_GAP

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{height}" viewBox="0 0 {_WIDTH} {height}">')
    out.append(f'<rect width="{_WIDTH}" height="{height}" fill="#fffdf8"/>')

    for k in range(n_traces):
        top = _MARGIN_T + k * (_BAND_H + _BAND_GAP)
        out.append(f'<rect x="{_MARGIN_L}" y="{top}" width="{plot_w}" '
                   f'height="{_BAND_H}" fill="#f4efe6"/>')
        out.append(f'<text x="{_MARGIN_L - 10}" y="{top + _BAND_H / 2:.2f}" '
                   f'text-anchor="end" dominant-baseline="middle" '
                   f'font-family="sans-serif" font-size="13" fill="#444">'
                   f'pillow {k + 1}</text>')
        pts = []
        for i in idx:
            f = frames[i]
            v = (f.values[k] - floor) / span
            v = 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)
            pts.append(f"{_fmt(x_of(f.t))},{_fmt(top + (1.0 - v) * _BAND_H)}")
        out.append(f'<polyline fill="none" stroke="{_TRACE_COLORS[k % 4]}" '
                   f'stroke-width="1.2" points="{" ".join(pts)}"/>')

    # section labels: the opening section plus one per boundary
    labels = [(t0, "Connection")]
    for ev in log.boundaries:
        labels.append((ev.t, ev.b))
    for t, name in labels:
        out.append(f'<text x="{_fmt(x_of(t) + 6)}" y="{_MARGIN_T - 14}" '
                   f'font-family="sans-serif" font-size="14" fill="#333">'
                   f'{name}</text>')

    for ev in log.boundaries:
        x = _fmt(x_of(ev.t))
        out.append(f'<line x1="{x}" y1="{_MARGIN_T - 8}" x2="{x}" '
                   f'y2="{rules_bottom}" stroke="{BOUNDARY_COLOR}" '
                   f'stroke-width="2"/>')

    # time axis ticks every whole 10 s
    tick = 10.0
    t_tick = math.ceil(t0 / tick) * tick
    while t_tick <= t1 + 1e-9:
        x = _fmt(x_of(t_tick))
        out.append(f'<line x1="{x}" y1="{rules_bottom}" x2="{x}" '
                   f'y2="{rules_bottom + 6}" stroke="#999" stroke-width="1"/>')
        out.append(f'<text x="{x}" y="{rules_bottom + 20}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11" fill="#666">'
                   f'{t_tick:.0f}s</text>')
        t_tick += tick

    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_notation(log: SessionLog, out_path: str) -> str:
    """Write the session's notation SVG to out_path; returns the SVG text."""
    svg = notation_svg(log)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(svg)
    return svg
