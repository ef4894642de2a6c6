"""Command-line entry points.

    somaphone perform  <scene>  live run: control loop + console bridge
    somaphone render   <scene>  offline: breath CSV -> WAV (+ session/SVG)
    somaphone simulate <scene>  generate a breath track CSV
    somaphone notate   <dir|csv> session directory (or bare track) -> SVG
    somaphone calibrate <scene> sweep the simulator, suggest a window

The scene argument falls back to the SOMAPHONE_SCENE environment variable.
Exit codes: 0 success, 1 runtime failure (diagnostic on stderr), 2 usage.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .errors import SomaphoneError
from .mapping import calibrate as calibrate_frames
from .notation import export_notation
from .runtime import LiveRuntime, offline_render, simulate_breath
from .scene import load_scene
from .session import SessionLog, read_breath_csv

SCENE_ENV = "SOMAPHONE_SCENE"


def _add_scene_arg(p: argparse.ArgumentParser):
    p.add_argument("scene", nargs="?", default=None,
                   help=f"scene JSON path (default: ${SCENE_ENV})")


def _resolve_scene(parser: argparse.ArgumentParser, args):
    path = args.scene if args.scene is not None else os.environ.get(SCENE_ENV)
    if not path:
        parser.error(f"no scene given and ${SCENE_ENV} is not set")
    scene = load_scene(path)
    if getattr(args, "seed", None) is not None:
        scene = dataclasses.replace(scene, seed=args.seed)
    return scene


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="somaphone",
        description="Breathing-pillow instrument: simulate, map, render, perform.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("perform", help="run live with the console bridge")
    _add_scene_arg(p)
    p.add_argument("--duration", type=float, default=None,
                   help="stop after this many seconds (default: run the piece)")
    p.add_argument("--source", choices=("sim", "osc"), default="sim",
                   help="pressure source: internal simulator or OSC input")
    p.add_argument("--console-port", type=int, default=None,
                   help="WebSocket port (default: scene io.ws_port)")
    p.add_argument("--console-dir", default=None,
                   help="serve static console assets from this directory")
    p.add_argument("--session", default=None, help="record the session here")
    p.add_argument("--seed", type=int, default=None, help="override scene seed")

    p = sub.add_parser("render", help="render a breath track to WAV offline")
    _add_scene_arg(p)
    p.add_argument("--breath", required=True, help="breath track CSV (t,p1..p4)")
    p.add_argument("--seed", type=int, default=None, help="override scene seed")
    p.add_argument("-o", "--out", required=True, help="output WAV path")
    p.add_argument("--session", default=None, help="also record a session here")
    p.add_argument("--svg", default=None, help="also export notation here")
    p.add_argument("--duration", type=float, default=None,
                   help="render length in seconds (default: scene total)")

    p = sub.add_parser("simulate", help="generate a breath track CSV")
    _add_scene_arg(p)
    p.add_argument("--duration", type=float, default=None,
                   help="track length in seconds (default: scene total)")
    p.add_argument("-o", "--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, default=None, help="override scene seed")

    p = sub.add_parser("notate", help="render a session's notation SVG")
    p.add_argument("session", help="session directory (or a bare breath CSV)")
    p.add_argument("-o", "--out", required=True, help="output SVG path")

    p = sub.add_parser("calibrate", help="sweep the simulator, print a window")
    _add_scene_arg(p)
    p.add_argument("--duration", type=float, default=20.0,
                   help="sweep length in seconds")
    p.add_argument("--seed", type=int, default=None, help="override scene seed")
    return parser


def _cmd_perform(parser, args) -> int:
    scene = _resolve_scene(parser, args)
    from .bridge import ConsoleBridge
    rt = LiveRuntime(scene, session_dir=args.session, source=args.source)
    port = args.console_port if args.console_port is not None else scene.io.ws_port
    bridge = ConsoleBridge(rt.snapshot, rt.command, port=port,
                           static_dir=args.console_dir)
    bridge.start()
    print(f"console bridge on {bridge.url}", file=sys.stderr)
    if bridge.http_port is not None:
        print(f"console assets on http://{bridge.host}:{bridge.http_port}/",
              file=sys.stderr)
    try:
        rt.run(duration=args.duration)
    except KeyboardInterrupt:
        rt.stop()
    finally:
        bridge.stop()
    res = rt.result
    if res is not None:
        print(f"performed {res.ticks} control ticks, "
              f"{len(res.boundaries)} section boundaries", file=sys.stderr)
    return 0


def _cmd_render(parser, args) -> int:
    scene = _resolve_scene(parser, args)
    breath = read_breath_csv(args.breath)
    res = offline_render(scene, breath, out_wav=args.out,
                         session_dir=args.session, svg_path=args.svg,
                         duration=args.duration, seed=args.seed)
    secs = res.samples / res.sample_rate
    print(f"wrote {args.out}: {secs:.2f} s at {res.sample_rate} Hz, "
          f"{res.ticks} control ticks", file=sys.stderr)
    return 0


def _cmd_simulate(parser, args) -> int:
    scene = _resolve_scene(parser, args)
    frames = simulate_breath(scene, duration=args.duration, out_csv=args.out)
    print(f"wrote {args.out}: {len(frames)} frames at "
          f"{scene.control_rate:.0f} Hz", file=sys.stderr)
    return 0


def _cmd_notate(parser, args) -> int:
    if os.path.isfile(args.session) and args.session.endswith(".csv"):
        frames = tuple(read_breath_csv(args.session))
        log = SessionLog(directory=os.path.dirname(args.session) or ".",
                         frames=frames, events=(), meta={})
    else:
        log = SessionLog.load(args.session)
    log.require_frames()
    export_notation(log, args.out)
    print(f"wrote {args.out}: {len(log.frames)} frames, "
          f"{len(log.boundaries)} boundaries", file=sys.stderr)
    return 0


def _cmd_calibrate(parser, args) -> int:
    scene = _resolve_scene(parser, args)
    deep = dataclasses.replace(
        scene, sim=dataclasses.replace(scene.sim, depth=1.0, breath_rate_hz=0.4))
    frames = simulate_breath(deep, duration=args.duration)
    cal = calibrate_frames(frames)
    floor = min(cal.raw_min)
    ceiling = max(cal.raw_max)
    print("suggested scene snippet:")
    print(f'  "calibration": {{"floor": {floor:.2f}, "ceiling": {ceiling:.2f}}}')
    for i in range(4):
        print(f"  pillow {i + 1}: [{cal.raw_min[i]:.2f}, {cal.raw_max[i]:.2f}]",
              file=sys.stderr)
    return 0


_COMMANDS = {
    "perform": _cmd_perform,
    "render": _cmd_render,
    "simulate": _cmd_simulate,
    "notate": _cmd_notate,
    "calibrate": _cmd_calibrate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](parser, args)
    except SomaphoneError as exc:
        print(f"somaphone {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"somaphone {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
