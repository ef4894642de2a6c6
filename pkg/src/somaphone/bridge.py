"""Console bridge: WebSocket telemetry out, JSON commands in.

Telemetry is pushed to every connected client at a fixed 20 Hz regardless of
the control rate (the newest snapshot wins), as one JSON text frame per tick
with a schema version field:

    {"v": 1, "t": ..., "pressures": [4], "normalized": [4],
     "fatigue": ..., "section": "Connection", "meters": {...},
     "running": true, "degraded": false}

Inbound frames are JSON commands handled by a caller-supplied function
(LiveRuntime.command). Malformed input gets an {"error": ...} reply and
changes nothing. The bridge holds no performance state, so clients can
drop and reconnect freely.

An optional plain-HTTP file server exposes the static console assets from a
directory, so one process can serve both the page and its socket.
"""

from __future__ import annotations

import asyncio
import http.server
import json
import threading
from functools import partial

from websockets.asyncio.server import broadcast, serve

from .errors import TransportError

TELEMETRY_RATE_HZ = 20.0


class ConsoleBridge:
    """WebSocket server on its own thread with its own event loop."""

    def __init__(self, snapshot_fn, command_fn, host: str = "127.0.0.1",
                 port: int = 8765, rate_hz: float = TELEMETRY_RATE_HZ,
                 static_dir: str | None = None, http_port: int = 0):
        self.snapshot_fn = snapshot_fn
        self.command_fn = command_fn
        self.host = host
        self.requested_port = port
        self.rate_hz = rate_hz
        self.static_dir = static_dir
        self.requested_http_port = http_port
        self.port: int | None = None
        self.http_port: int | None = None
        self._clients: set = set()
        self._thread: threading.Thread | None = None
        self._loop: asyncio.AbstractEventLoop | None = None
        self._stop_async: asyncio.Event | None = None
        self._ready = threading.Event()
        self._startup_error: Exception | None = None
        self._httpd: http.server.ThreadingHTTPServer | None = None
        self._http_thread: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self):
        self._thread = threading.Thread(target=self._run, name="console-bridge",
                                        daemon=True)
        self._thread.start()
        if not self._ready.wait(timeout=5.0):
            raise TransportError("console bridge did not start within 5 s")
        if self._startup_error is not None:
            raise TransportError(
                f"cannot serve WebSocket on {self.host}:{self.requested_port}: "
                f"{self._startup_error}")
        if self.static_dir is not None:
            self._start_http()
        return self

    def stop(self):
        if self._loop is not None and self._stop_async is not None:
            try:
                self._loop.call_soon_threadsafe(self._stop_async.set)
            except RuntimeError:
                pass
        if self._thread is not None:
            self._thread.join(timeout=3.0)
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            if self._http_thread is not None:
                self._http_thread.join(timeout=2.0)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    @property
    def url(self) -> str:
        return f"ws://{self.host}:{self.port}"

    # -- internals -----------------------------------------------------------

    def _run(self):
        try:
            asyncio.run(self._main())
        except Exception as exc:   # surfaced via start()
            self._startup_error = exc
            self._ready.set()

    async def _main(self):
        self._loop = asyncio.get_running_loop()
        self._stop_async = asyncio.Event()
        try:
            async with serve(self._handler, self.host, self.requested_port) as server:
                self.port = server.sockets[0].getsockname()[1]
                pump = asyncio.create_task(self._telemetry())
                self._ready.set()
                await self._stop_async.wait()
                pump.cancel()
        except OSError as exc:
            self._startup_error = exc
            self._ready.set()

    async def _telemetry(self):
        period = 1.0 / self.rate_hz
        while True:
            snap = self.snapshot_fn()
            if snap and self._clients:
                broadcast(self._clients, json.dumps(snap, sort_keys=True))
            await asyncio.sleep(period)

    async def _handler(self, ws):
        self._clients.add(ws)
        try:
            async for raw in ws:
                try:
                    cmd = json.loads(raw)
                except json.JSONDecodeError as exc:
                    await ws.send(json.dumps(
                        {"v": 1, "error": f"invalid JSON: {exc.msg}"}))
                    continue
                if self.command_fn is None:
                    resp = {"error": "no command handler attached"}
                else:
                    resp = self.command_fn(cmd) or {}
                await ws.send(json.dumps({"v": 1, **resp}, sort_keys=True))
        finally:
            self._clients.discard(ws)

    def _start_http(self):
        handler = partial(_QuietFileHandler, directory=self.static_dir)
        try:
            self._httpd = http.server.ThreadingHTTPServer(
                (self.host, self.requested_http_port), handler)
        except OSError as exc:
            raise TransportError(
                f"cannot serve console assets on {self.host}:"
                f"{self.requested_http_port}: {exc}") from exc
        self.http_port = self._httpd.server_address[1]
        self._http_thread = threading.Thread(target=self._httpd.serve_forever,
                                             name="console-http", daemon=True)
        self._http_thread.start()


class _QuietFileHandler(http.server.SimpleHTTPRequestHandler):
    def log_message(self, fmt, *args):
        pass
