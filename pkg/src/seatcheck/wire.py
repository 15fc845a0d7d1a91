"""Line protocol between the (simulated) scan device and the host.

ASCII, pipe-delimited, LF-terminated lines:

    EV|SCAN|<8hex>|<seq>        device -> host: card read
    EV|WT|<chair>|<grams>|<seq> device -> host: seat transition weight
    CMD|LCD|<CODE>|<arg>        host -> device: display update
    CMD|TARE|<chair>            host -> device: re-zero a chair
    OK|<seq>                    ack
    ERR|<seq>|<reason>          nack

Weight travels as integer grams so the grammar stays float-free. Fields may
not contain pipes or newlines; the LCD arg charset is [A-Z0-9 _.-]. There is
no checksum: the transport here is an in-process loopback (a trailing `*XX`
could be appended later without breaking the grammar).
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .errors import FramingError, ProtocolError, TransportBusyError
from .roster import UID_RE
from .verify import LcdCode

MAX_LINE_BYTES = 256
MAX_GRAMS = 500_000
MAX_SEQ = 2**32 - 1

_TOKEN_RE = re.compile(r"^[A-Za-z0-9_.\-]{1,32}$")
_ARG_RE = re.compile(r"^[A-Z0-9 _.\-]{0,16}$")
_INT_RE = re.compile(r"^(0|[1-9][0-9]*)$")


class EventToken(str, Enum):
    """Host-side event vocabulary (wire-fidelity Turkish tokens)."""

    YANLIS_SAAT = "YANLIS_SAAT"
    DERS_KAYIT = "DERS_KAYIT"
    DERS_SILINDI = "DERS_SILINDI"
    OGRENCI_BILGILERI_GUNCELLENDI = "OGRENCI_BILGILERI_GUNCELLENDI"
    KATILDI = "KATILDI"

    @property
    def english(self) -> str:
        return _TOKEN_ENGLISH[self]


_TOKEN_ENGLISH = {
    EventToken.YANLIS_SAAT: "WRONG_TIME",
    EventToken.DERS_KAYIT: "COURSE_ENROLLMENT",
    EventToken.DERS_SILINDI: "COURSE_DELETED",
    EventToken.OGRENCI_BILGILERI_GUNCELLENDI: "STUDENT_INFORMATION_UPDATED",
    EventToken.KATILDI: "ATTENDED",
}


@dataclass(frozen=True)
class ScanEvent:
    uid: str
    seq: int


@dataclass(frozen=True)
class WeightEvent:
    chair_id: str
    grams: int
    seq: int


@dataclass(frozen=True)
class LcdCommand:
    code: LcdCode
    arg: str = ""


@dataclass(frozen=True)
class TareCommand:
    chair_id: str


@dataclass(frozen=True)
class Ack:
    seq: int


@dataclass(frozen=True)
class Nack:
    seq: int
    reason: str


Frame = Union[ScanEvent, WeightEvent, LcdCommand, TareCommand, Ack, Nack]


def _check_seq(seq: int) -> int:
    if not isinstance(seq, int) or isinstance(seq, bool) or not 0 <= seq <= MAX_SEQ:
        raise ProtocolError(f"seq out of range: {seq!r}")
    return seq


def _check_token(name: str, value: str) -> str:
    if not _TOKEN_RE.match(value):
        raise ProtocolError(f"bad {name}: {value!r}")
    return value


def encode(frame: Frame) -> bytes:
    """Serialize one frame to its LF-terminated wire line."""
    if isinstance(frame, ScanEvent):
        if not UID_RE.match(frame.uid):
            raise ProtocolError(f"bad uid: {frame.uid!r}")
        line = f"EV|SCAN|{frame.uid}|{_check_seq(frame.seq)}"
    elif isinstance(frame, WeightEvent):
        _check_token("chair id", frame.chair_id)
        if not isinstance(frame.grams, int) or not 0 <= frame.grams <= MAX_GRAMS:
            raise ProtocolError(f"grams out of range: {frame.grams!r}")
        line = f"EV|WT|{frame.chair_id}|{frame.grams}|{_check_seq(frame.seq)}"
    elif isinstance(frame, LcdCommand):
        if not isinstance(frame.code, LcdCode):
            raise ProtocolError(f"bad lcd code: {frame.code!r}")
        if not _ARG_RE.match(frame.arg):
            raise ProtocolError(f"bad lcd arg: {frame.arg!r}")
        line = f"CMD|LCD|{_code_name(frame.code)}|{frame.arg}"
    elif isinstance(frame, TareCommand):
        _check_token("chair id", frame.chair_id)
        line = f"CMD|TARE|{frame.chair_id}"
    elif isinstance(frame, Ack):
        line = f"OK|{_check_seq(frame.seq)}"
    elif isinstance(frame, Nack):
        _check_token("reason", frame.reason)
        line = f"ERR|{_check_seq(frame.seq)}|{frame.reason}"
    else:
        raise ProtocolError(f"not a frame: {frame!r}")
    return line.encode("ascii") + b"\n"


def _code_name(code: LcdCode) -> str:
    return code.name


_CODE_BY_NAME = {code.name: code for code in LcdCode}


def _parse_seq(text: str) -> int:
    if not _INT_RE.match(text):
        raise ProtocolError(f"bad seq: {text!r}")
    value = int(text)
    if value > MAX_SEQ:
        raise ProtocolError(f"seq too large: {value}")
    return value


def decode(line: bytes) -> Frame:
    """Parse one wire line (with or without its trailing LF) into a frame.

    Never raises anything but ProtocolError on garbage input.
    """
    if not isinstance(line, (bytes, bytearray)):
        raise ProtocolError("decode expects bytes")
    if line.endswith(b"\n"):
        line = line[:-1]
    try:
        text = bytes(line).decode("ascii")
    except UnicodeDecodeError as exc:
        raise ProtocolError(f"non-ascii line: {exc}") from None
    if "\n" in text or "\r" in text:
        raise ProtocolError("embedded line break")

    parts = text.split("|")
    tag = parts[0]
    if tag == "EV" and len(parts) >= 2 and parts[1] == "SCAN":
        if len(parts) != 4:
            raise ProtocolError(f"EV|SCAN wants 4 fields, got {len(parts)}")
        if not UID_RE.match(parts[2]):
            raise ProtocolError(f"bad uid: {parts[2]!r}")
        return ScanEvent(uid=parts[2], seq=_parse_seq(parts[3]))
    if tag == "EV" and len(parts) >= 2 and parts[1] == "WT":
        if len(parts) != 5:
            raise ProtocolError(f"EV|WT wants 5 fields, got {len(parts)}")
        _require(_TOKEN_RE.match(parts[2]), f"bad chair id: {parts[2]!r}")
        _require(_INT_RE.match(parts[3]), f"bad grams: {parts[3]!r}")
        grams = int(parts[3])
        _require(grams <= MAX_GRAMS, f"grams too large: {grams}")
        return WeightEvent(chair_id=parts[2], grams=grams, seq=_parse_seq(parts[4]))
    if tag == "CMD" and len(parts) >= 2 and parts[1] == "LCD":
        if len(parts) != 4:
            raise ProtocolError(f"CMD|LCD wants 4 fields, got {len(parts)}")
        code = _CODE_BY_NAME.get(parts[2])
        _require(code is not None, f"unknown lcd code: {parts[2]!r}")
        _require(_ARG_RE.match(parts[3]), f"bad lcd arg: {parts[3]!r}")
        return LcdCommand(code=code, arg=parts[3])
    if tag == "CMD" and len(parts) >= 2 and parts[1] == "TARE":
        if len(parts) != 3:
            raise ProtocolError(f"CMD|TARE wants 3 fields, got {len(parts)}")
        _require(_TOKEN_RE.match(parts[2]), f"bad chair id: {parts[2]!r}")
        return TareCommand(chair_id=parts[2])
    if tag == "OK":
        if len(parts) != 2:
            raise ProtocolError(f"OK wants 2 fields, got {len(parts)}")
        return Ack(seq=_parse_seq(parts[1]))
    if tag == "ERR":
        if len(parts) != 3:
            raise ProtocolError(f"ERR wants 3 fields, got {len(parts)}")
        _require(_TOKEN_RE.match(parts[2]), f"bad reason: {parts[2]!r}")
        return Nack(seq=_parse_seq(parts[1]), reason=parts[2])
    raise ProtocolError(f"unknown frame tag: {text[:32]!r}")


def _require(condition, message: str) -> None:
    if not condition:
        raise ProtocolError(message)


def split_lines(buffer: bytes) -> tuple[list[bytes], bytes]:
    """Split a byte buffer on LF; the partial trailing line is the remainder.

    An unterminated run longer than MAX_LINE_BYTES cannot be a valid line and
    raises FramingError (stream users should drop the buffer and resync).
    """
    lines = buffer.split(b"\n")
    remainder = lines.pop()
    if len(remainder) > MAX_LINE_BYTES:
        raise FramingError(
            f"unterminated line exceeds {MAX_LINE_BYTES} bytes"
        )
    return lines, remainder


class LineSplitter:
    """Stateful reassembler for a fragmented byte stream.

    Oversize unterminated input is discarded (counted in ``framing_errors``)
    and scanning resumes at the next LF.
    """

    def __init__(self) -> None:
        self._buffer = b""
        self.framing_errors = 0

    def feed(self, chunk: bytes) -> list[bytes]:
        self._buffer += chunk
        lines = self._buffer.split(b"\n")
        self._buffer = lines.pop()
        if len(self._buffer) > MAX_LINE_BYTES:
            self._buffer = b""
            self.framing_errors += 1
        return lines


class BytePipe:
    """One-direction byte stream delivering random-size chunks (seeded)."""

    def __init__(self, rng: random.Random, max_chunk: int = 64) -> None:
        self._rng = rng
        self._pending = bytearray()
        self._max_chunk = max_chunk

    def write(self, data: bytes) -> None:
        self._pending.extend(data)

    def read(self) -> bytes:
        """Next chunk at an arbitrary boundary; empty bytes when drained."""
        if not self._pending:
            return b""
        size = self._rng.randint(1, min(len(self._pending), self._max_chunk))
        chunk = bytes(self._pending[:size])
        del self._pending[:size]
        return chunk

    def __len__(self) -> int:
        return len(self._pending)


@dataclass
class DuplexChannel:
    """In-process stand-in for the serial link, with exclusive host ownership.

    Mirrors real COM-port behavior: while one program holds the port open,
    a second open attempt fails instead of silently sharing the stream.
    """

    seed: int = 0
    device_to_host: BytePipe = field(init=False)
    host_to_device: BytePipe = field(init=False)
    _owner: str | None = field(default=None, init=False)

    def __post_init__(self) -> None:
        rng = random.Random(f"channel:{self.seed}")
        self.device_to_host = BytePipe(rng)
        self.host_to_device = BytePipe(rng)

    @property
    def owner(self) -> str | None:
        return self._owner

    def open(self, owner: str) -> None:
        if self._owner is not None:
            raise TransportBusyError(
                f"transport already owned by {self._owner!r}"
            )
        self._owner = owner

    def close(self, owner: str) -> None:
        if self._owner == owner:
            self._owner = None
