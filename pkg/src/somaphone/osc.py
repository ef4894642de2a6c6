"""OSC 1.0 codec and message routing.

Bit-exact encoder/decoder for the subset used on the pillow link (int32,
float32, string, blob; bundles with NTP timetags) plus the exact-match route
table that turns raw messages into typed control events. The decoder is
total: any byte string yields a value or MalformedPacket, never a crash.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from .errors import AddressError, MalformedPacket, UnroutedMessage

IMMEDIATELY = 1  # OSC timetag 0x0000000000000001

# characters OSC 1.0 reserves for address patterns; we do exact matching only
_ADDRESS_FORBIDDEN = set(' #*,?[]{}')

_MAX_BUNDLE_DEPTH = 32


@dataclass(frozen=True)
class OscMessage:
    address: str
    args: tuple = ()


@dataclass(frozen=True)
class OscBundle:
    timetag: int = IMMEDIATELY
    elements: tuple = ()


def validate_address(address: str) -> None:
    """Raise AddressError unless the string is a legal OSC 1.0 address."""
    if not address or address[0] != '/':
        raise AddressError(f"address must start with '/': {address!r}")
    for ch in address:
        o = ord(ch)
        if o < 0x21 or o > 0x7E:
            raise AddressError(f"address contains non-printable/non-ASCII byte: {address!r}")
        if ch in _ADDRESS_FORBIDDEN:
            raise AddressError(f"address contains reserved character {ch!r}: {address!r}")


def _pad_string(s: str) -> bytes:
    data = s.encode('ascii') + b'\0'
    return data + b'\0' * (-len(data) % 4)


def _pad_blob(data: bytes) -> bytes:
    return struct.pack('>i', len(data)) + data + b'\0' * (-len(data) % 4)


def encode_osc(msg) -> bytes:
    """Encode a message or bundle per OSC 1.0 (4-byte aligned, big-endian)."""
    if isinstance(msg, OscBundle):
        out = [b'#bundle\0', struct.pack('>Q', msg.timetag & 0xFFFFFFFFFFFFFFFF)]
        for el in msg.elements:
            payload = encode_osc(el)
            out.append(struct.pack('>i', len(payload)))
            out.append(payload)
        return b''.join(out)
    if not isinstance(msg, OscMessage):
        raise TypeError(f"expected OscMessage or OscBundle, got {type(msg).__name__}")
    validate_address(msg.address)
    tags = [',']
    payload = []
    for arg in msg.args:
        if isinstance(arg, bool):
            raise TypeError("bool is not an OSC 1.0 argument type")
        if isinstance(arg, int):
            if not -2**31 <= arg < 2**31:
                raise ValueError(f"int32 out of range: {arg}")
            tags.append('i')
            payload.append(struct.pack('>i', arg))
        elif isinstance(arg, float):
            tags.append('f')
            payload.append(struct.pack('>f', arg))
        elif isinstance(arg, str):
            if not all(0x00 < ord(c) < 0x80 for c in arg):
                raise TypeError(f"OSC strings must be ASCII: {arg!r}")
            tags.append('s')
            payload.append(_pad_string(arg))
        elif isinstance(arg, (bytes, bytearray)):
            tags.append('b')
            payload.append(_pad_blob(bytes(arg)))
        else:
            raise TypeError(f"unsupported OSC argument type: {type(arg).__name__}")
    return _pad_string(msg.address) + _pad_string(''.join(tags)) + b''.join(payload)


class _Reader:
    """Cursor over a packet; every misstep raises MalformedPacket."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.remaining() < n:
            raise MalformedPacket(f"truncated packet: wanted {n} bytes at offset {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def take_string(self) -> str:
        end = self.data.find(b'\0', self.pos)
        if end < 0:
            raise MalformedPacket("unterminated OSC string")
        raw = self.data[self.pos:end]
        advance = end - self.pos + 1
        advance += -advance % 4
        if self.remaining() < advance:
            raise MalformedPacket("OSC string padding exceeds packet")
        pad = self.data[self.pos + (end - self.pos) + 1:self.pos + advance]
        if pad.strip(b'\0'):
            raise MalformedPacket("OSC string padding must be NUL bytes")
        self.pos += advance
        try:
            return raw.decode('ascii')
        except UnicodeDecodeError as exc:
            raise MalformedPacket(f"non-ASCII OSC string: {exc}") from None


def _decode_message(r: _Reader) -> OscMessage:
    address = r.take_string()
    if not address.startswith('/'):
        raise MalformedPacket(f"address must start with '/': {address!r}")
    tags = r.take_string()
    if not tags.startswith(','):
        raise MalformedPacket(f"type tag string must start with ',': {tags!r}")
    args = []
    for tag in tags[1:]:
        if tag == 'i':
            args.append(struct.unpack('>i', r.take(4))[0])
        elif tag == 'f':
            args.append(struct.unpack('>f', r.take(4))[0])
        elif tag == 's':
            args.append(r.take_string())
        elif tag == 'b':
            size = struct.unpack('>i', r.take(4))[0]
            if size < 0:
                raise MalformedPacket(f"negative blob size {size}")
            data = r.take(size)
            pad = r.take(-size % 4)
            if pad.strip(b'\0'):
                raise MalformedPacket("blob padding must be NUL bytes")
            args.append(data)
        else:
            raise MalformedPacket(f"unsupported type tag {tag!r}")
    return OscMessage(address=address, args=tuple(args))


def _decode_packet(data: bytes, depth: int):
    if depth > _MAX_BUNDLE_DEPTH:
        raise MalformedPacket("bundle nesting too deep")
    if len(data) == 0 or len(data) % 4 != 0:
        raise MalformedPacket(f"packet length {len(data)} is not a positive multiple of 4")
    if data.startswith(b'#bundle\0'):
        r = _Reader(data)
        r.take(8)
        timetag = struct.unpack('>Q', r.take(8))[0]
        elements = []
        while r.remaining() > 0:
            size = struct.unpack('>i', r.take(4))[0]
            if size <= 0 or size % 4 != 0:
                raise MalformedPacket(f"bad bundle element size {size}")
            elements.append(_decode_packet(r.take(size), depth + 1))
        return OscBundle(timetag=timetag, elements=tuple(elements))
    r = _Reader(data)
    msg = _decode_message(r)
    if r.remaining():
        raise MalformedPacket(f"{r.remaining()} trailing bytes after message")
    return msg


def decode_osc(packet: bytes):
    """Decode a datagram into an OscMessage or OscBundle (inverse of encode)."""
    if not isinstance(packet, (bytes, bytearray, memoryview)):
        raise MalformedPacket(f"expected bytes, got {type(packet).__name__}")
    return _decode_packet(bytes(packet), 0)


def flatten(msg_or_bundle):
    """Yield the messages of a packet in order, recursing through bundles."""
    if isinstance(msg_or_bundle, OscBundle):
        for el in msg_or_bundle.elements:
            yield from flatten(el)
    else:
        yield msg_or_bundle


# ---------------------------------------------------------------------------
# Routing: address schema -> typed control events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PressureReading:
    pillow: int      # 1-based, as on the wire
    hpa: float


@dataclass(frozen=True)
class FatigueReading:
    value: float


@dataclass(frozen=True)
class SectionCue:
    action: str              # "next" | "goto"
    target: int | None = None


@dataclass(frozen=True)
class TransportCmd:
    action: str              # "start" | "stop"


@dataclass(frozen=True)
class MeterReading:
    bus: str
    value: float


def default_route_table() -> dict:
    """Address -> handler id for the pillow-link schema (one value per address)."""
    table = {}
    for i in range(1, 5):
        table[f"/pillow/{i}/pressure"] = ("pressure", i)
    table["/body/fatigue"] = ("fatigue",)
    table["/section/next"] = ("section_next",)
    table["/section/goto"] = ("section_goto",)
    table["/transport/start"] = ("transport", "start")
    table["/transport/stop"] = ("transport", "stop")
    for bus in ("tape", "choir", "grain", "live", "master"):
        table[f"/engine/meter/{bus}"] = ("meter", bus)
    return table


def _one_number(msg: OscMessage) -> float:
    if len(msg.args) != 1 or not isinstance(msg.args[0], (int, float)) \
            or isinstance(msg.args[0], bool):
        raise UnroutedMessage(f"{msg.address} expects exactly one numeric argument, got {msg.args!r}")
    v = float(msg.args[0])
    if not math.isfinite(v):
        raise UnroutedMessage(f"{msg.address} argument must be finite, got {v!r}")
    return v


def route(msg: OscMessage, table: dict | None = None):
    """Match a message against the route table and build its ControlEvent.

    Exact string match only; unknown addresses (or malformed arguments for a
    known address) raise UnroutedMessage so the transport can count the drop.
    """
    if table is None:
        table = default_route_table()
    if not table:
        raise ValueError("route table must be nonempty")
    handler = table.get(msg.address)
    if handler is None:
        raise UnroutedMessage(f"no route for address {msg.address!r}")
    kind = handler[0]
    if kind == "pressure":
        return PressureReading(pillow=handler[1], hpa=_one_number(msg))
    if kind == "fatigue":
        return FatigueReading(value=_one_number(msg))
    if kind == "section_next":
        if msg.args:
            raise UnroutedMessage(f"/section/next takes no arguments, got {msg.args!r}")
        return SectionCue(action="next")
    if kind == "section_goto":
        target = _one_number(msg)
        if target != int(target):
            raise UnroutedMessage(f"/section/goto expects an integer index, got {target!r}")
        return SectionCue(action="goto", target=int(target))
    if kind == "transport":
        if msg.args:
            raise UnroutedMessage(f"{msg.address} takes no arguments, got {msg.args!r}")
        return TransportCmd(action=handler[1])
    if kind == "meter":
        return MeterReading(bus=handler[1], value=_one_number(msg))
    raise UnroutedMessage(f"unknown handler id {handler!r} for {msg.address!r}")
