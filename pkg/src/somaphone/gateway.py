"""UDP transport for the OSC link.

Runs beside the engine: inbound datagrams are decoded and routed into an
event sink; outbound pressure frames are encoded at the control rate with
last-write-wins coalescing (only the newest frame per pillow goes out when
the link lags). Decode failures are counted, never fatal.
"""

from __future__ import annotations

import logging
import socket
import threading
from dataclasses import dataclass, field

from .errors import MalformedPacket, TransportError, UnroutedMessage
from .osc import OscMessage, decode_osc, default_route_table, encode_osc, flatten, route

log = logging.getLogger(__name__)

DEFAULT_IN_PORT = 9000
DEFAULT_OUT_PORT = 9001


@dataclass
class GatewayStats:
    received: int = 0
    delivered: int = 0
    dropped_malformed: int = 0
    dropped_unrouted: int = 0
    sent: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_malformed + self.dropped_unrouted


def frame_messages(frame) -> list:
    """Per-pillow OSC messages for one PressureFrame (float32 hPa each)."""
    return [OscMessage(f"/pillow/{i + 1}/pressure", (float(v),))
            for i, v in enumerate(frame.values)]


class OscGateway:
    """Bidirectional OSC/UDP endpoint.

    `event_sink(event)` receives every routed inbound ControlEvent;
    `frame_source()` returns the newest PressureFrame (or None) and is polled
    at the control rate for the outbound side.
    """

    def __init__(self, bind=("127.0.0.1", DEFAULT_IN_PORT), out_addr=None,
                 event_sink=None, frame_source=None, control_rate: float = 100.0,
                 route_table: dict | None = None):
        self.bind_addr = bind
        self.out_addr = out_addr
        self.event_sink = event_sink
        self.frame_source = frame_source
        self.control_rate = control_rate
        self.route_table = route_table if route_table is not None else default_route_table()
        self.stats = GatewayStats()
        self._sock = None
        self._rx_thread = None
        self._tx_thread = None
        self._stop = threading.Event()

    @property
    def port(self) -> int:
        """Actual bound port (useful when binding to port 0)."""
        return self._sock.getsockname()[1]

    def start(self):
        try:
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 20)
            sock.bind(self.bind_addr)
        except OSError as exc:
            raise TransportError(f"cannot bind UDP {self.bind_addr}: {exc}") from exc
        sock.settimeout(0.1)
        self._sock = sock
        self._stop.clear()
        self._rx_thread = threading.Thread(target=self._rx_loop, name="osc-rx", daemon=True)
        self._rx_thread.start()
        if self.out_addr is not None and self.frame_source is not None:
            self._tx_thread = threading.Thread(target=self._tx_loop, name="osc-tx", daemon=True)
            self._tx_thread.start()
        return self

    def stop(self):
        self._stop.set()
        for t in (self._rx_thread, self._tx_thread):
            if t is not None:
                t.join(timeout=2.0)
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def _rx_loop(self):
        while not self._stop.is_set():
            try:
                data, _ = self._sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            self.stats.received += 1
            try:
                decoded = decode_osc(data)
            except MalformedPacket as exc:
                self.stats.dropped_malformed += 1
                log.debug("dropped malformed datagram: %s", exc)
                continue
            for msg in flatten(decoded):
                try:
                    event = route(msg, self.route_table)
                except UnroutedMessage as exc:
                    self.stats.dropped_unrouted += 1
                    log.debug("dropped unrouted message: %s", exc)
                    continue
                self.stats.delivered += 1
                if self.event_sink is not None:
                    self.event_sink(event)

    def _tx_loop(self):
        tick = 1.0 / self.control_rate
        last_seq = -1
        out_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            while not self._stop.wait(tick):
                frame = self.frame_source()
                if frame is None or frame.seq == last_seq:
                    continue
                last_seq = frame.seq  # coalesce: newest frame only
                for msg in frame_messages(frame):
                    try:
                        out_sock.sendto(encode_osc(msg), self.out_addr)
                        self.stats.sent += 1
                    except OSError as exc:
                        log.debug("send failed: %s", exc)
        finally:
            out_sock.close()
