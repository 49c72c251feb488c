"""AX.25 UI-frame layer: addresses, FCS, bit stuffing, NRZI, flag hunting.

The line-bit boundary with the modem carries NRZI-coded levels, so the
modem stays a pure FSK codec and this module owns everything that makes
a byte frame into an HDLC bit stream and back.
"""

from __future__ import annotations

import re
import struct
import time
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

FLAG = 0x7E
UI_CONTROL = 0x03
NO_LAYER3_PID = 0xF0

_CALL_RE = re.compile(r"^[A-Z0-9]{1,6}$")

# Table-driven CRC-16/X.25 (reflected 0x1021, init/xorout 0xFFFF).
_FCS_POLY = 0x8408


def _build_fcs_table():
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = (crc >> 1) ^ _FCS_POLY if crc & 1 else crc >> 1
        table.append(crc)
    return tuple(table)


_FCS_TABLE = _build_fcs_table()


def compute_fcs(data: bytes) -> int:
    """AX.25 frame-check sequence of a byte string."""
    crc = 0xFFFF
    for byte in data:
        crc = (crc >> 8) ^ _FCS_TABLE[(crc ^ byte) & 0xFF]
    return crc ^ 0xFFFF


@dataclass(frozen=True)
class Callsign:
    """Amateur callsign base plus SSID, e.g. W3EAX-12."""

    base: str
    ssid: int = 0

    def __post_init__(self):
        if not _CALL_RE.match(self.base):
            raise ValidationError(f"bad callsign base {self.base!r}")
        if not 0 <= self.ssid <= 15:
            raise ValidationError(f"SSID {self.ssid} outside 0..15")

    @classmethod
    def parse(cls, text: str) -> "Callsign":
        base, dash, ssid = text.strip().upper().partition("-")
        return cls(base, int(ssid) if dash else 0)

    def __str__(self) -> str:
        return self.base if self.ssid == 0 else f"{self.base}-{self.ssid}"


def encode_address(cs: Callsign, last: bool, repeated: bool = False) -> bytes:
    """Encode one 7-byte AX.25 address field.

    Six space-padded characters shifted left one bit; the seventh byte
    packs the SSID, the repeated (H) bit, reserved bits, and the
    extension bit marking the final address.
    """
    out = bytearray(ord(c) << 1 for c in cs.base.ljust(6))
    ssid_byte = 0x60 | (cs.ssid << 1)
    if repeated:
        ssid_byte |= 0x80
    if last:
        ssid_byte |= 0x01
    out.append(ssid_byte)
    return bytes(out)


def decode_address(raw: bytes) -> tuple[Callsign, bool, bool]:
    """Inverse of :func:`encode_address` -> (callsign, last, repeated)."""
    if len(raw) != 7:
        raise ValidationError("address field must be 7 bytes")
    base = bytes(b >> 1 for b in raw[:6]).decode("ascii", "replace").rstrip()
    cs = Callsign(base, (raw[6] >> 1) & 0x0F)
    return cs, bool(raw[6] & 0x01), bool(raw[6] & 0x80)


@dataclass(frozen=True)
class Ax25Frame:
    """Decoded link-layer frame (UI framing by default)."""

    destination: Callsign
    source: Callsign
    digipeaters: tuple = ()  # of (Callsign, repeated: bool)
    control: int = UI_CONTROL
    pid: int = NO_LAYER3_PID
    info: bytes = b""
    dest_repeated: bool = False
    source_repeated: bool = False

    def __post_init__(self):
        if len(self.digipeaters) > 8:
            raise ValidationError("at most 8 digipeaters")
        if len(self.info) > 256:
            raise ValidationError("info field longer than 256 bytes")
        object.__setattr__(self, "info", bytes(self.info))
        object.__setattr__(self, "digipeaters", tuple(self.digipeaters))

    @property
    def is_ui(self) -> bool:
        return self.control == UI_CONTROL

    def to_bytes(self) -> bytes:
        """Serialize address/control/pid/info (no FCS, no flags)."""
        out = bytearray()
        out += encode_address(self.destination, False, self.dest_repeated)
        last_src = not self.digipeaters
        out += encode_address(self.source, last_src, self.source_repeated)
        for i, (digi, repeated) in enumerate(self.digipeaters):
            out += encode_address(digi, i == len(self.digipeaters) - 1, repeated)
        out.append(self.control)
        if self.control == UI_CONTROL:
            out.append(self.pid)
        out += self.info
        return bytes(out)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Ax25Frame":
        """Parse address/control/pid/info bytes (no FCS, no flags)."""
        if len(raw) < 15:
            raise ValidationError("frame shorter than two addresses + control")
        dest, last, dest_rep = decode_address(raw[0:7])
        if last:
            raise ValidationError("destination marked as final address")
        source, last, src_rep = decode_address(raw[7:14])
        digis = []
        offset = 14
        while not last:
            if offset + 7 > len(raw):
                raise ValidationError("truncated digipeater address")
            digi, last, rep = decode_address(raw[offset : offset + 7])
            digis.append((digi, rep))
            offset += 7
        if len(digis) > 8:
            raise ValidationError("more than 8 digipeaters")
        if offset + 1 > len(raw):
            raise ValidationError("missing control byte")
        control = raw[offset]
        offset += 1
        pid = 0
        if control == UI_CONTROL:
            if offset >= len(raw):
                raise ValidationError("UI frame missing PID")
            pid = raw[offset]
            offset += 1
        return cls(
            destination=dest,
            source=source,
            digipeaters=tuple(digis),
            control=control,
            pid=pid,
            info=raw[offset:],
            dest_repeated=dest_rep,
            source_repeated=src_rep,
        )

    def to_tnc2(self) -> str:
        """Render in TNC2 monitor form: SRC>DEST,DIGI1*,DIGI2:info."""
        path = str(self.destination)
        for digi, repeated in self.digipeaters:
            path += f",{digi}{'*' if repeated else ''}"
        return f"{self.source}>{path}:{self.info.decode('latin-1')}"

    @classmethod
    def from_tnc2(cls, line: str) -> "Ax25Frame":
        src_text, sep, rest = line.partition(">")
        if not sep or ":" not in rest:
            raise ValidationError(f"not a TNC2 monitor line: {line!r}")
        path_text, _, info = rest.partition(":")
        parts = path_text.split(",")
        digis = []
        for part in parts[1:]:
            repeated = part.endswith("*")
            digis.append((Callsign.parse(part.rstrip("*")), repeated))
        return cls(
            destination=Callsign.parse(parts[0]),
            source=Callsign.parse(src_text),
            digipeaters=tuple(digis),
            info=info.encode("latin-1"),
        )


@dataclass(frozen=True)
class FrameEvent:
    """A frame that cleared the FCS check, with its receive timestamp."""

    frame: Ax25Frame
    received_at: float
    raw: bytes
    fcs_ok: bool = True


def bytes_to_bits(data: bytes) -> np.ndarray:
    """Serialize bytes LSB-first into a bit array."""
    if not data:
        return np.zeros(0, dtype=np.uint8)
    arr = np.frombuffer(bytes(data), dtype=np.uint8)
    return np.unpackbits(arr, bitorder="little")


def bits_to_bytes(bits: np.ndarray) -> bytes:
    """Pack a multiple-of-8 bit array LSB-first into bytes."""
    if len(bits) % 8:
        raise ValidationError("bit count not a multiple of 8")
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def bit_stuff(bits: np.ndarray) -> np.ndarray:
    """Insert a 0 after every run of five 1s."""
    out = []
    ones = 0
    for b in np.asarray(bits, dtype=np.uint8):
        out.append(int(b))
        if b:
            ones += 1
            if ones == 5:
                out.append(0)
                ones = 0
        else:
            ones = 0
    return np.array(out, dtype=np.uint8)


def nrzi_encode(bits: np.ndarray, initial_level: int = 1) -> np.ndarray:
    """NRZI line code: 0 toggles the level, 1 holds it."""
    levels = []
    level = initial_level
    for b in np.asarray(bits, dtype=np.uint8):
        if b == 0:
            level ^= 1
        levels.append(level)
    return np.array(levels, dtype=np.uint8)


def nrzi_decode(levels: np.ndarray, initial_level: int = 0) -> np.ndarray:
    """Inverse of NRZI: equal consecutive levels decode to 1."""
    arr = np.asarray(levels, dtype=np.uint8)
    if arr.size == 0:
        return arr
    prev = np.concatenate([[initial_level], arr[:-1]])
    return (arr == prev).astype(np.uint8)


def frame_to_linebits(
    frame: Ax25Frame, preamble_flags: int = 32, tail_flags: int = 2
) -> np.ndarray:
    """Serialize a frame into NRZI line bits ready for the modulator."""
    if preamble_flags < 1 or tail_flags < 1:
        raise ValidationError("need at least one opening and one closing flag")
    content = frame.to_bytes()
    fcs = compute_fcs(content)
    stuffed = bit_stuff(bytes_to_bits(content + struct.pack("<H", fcs)))
    flag_bits = bytes_to_bits(bytes([FLAG]))
    stream = np.concatenate(
        [np.tile(flag_bits, preamble_flags), stuffed, np.tile(flag_bits, tail_flags)]
    )
    return nrzi_encode(stream)


class LinebitsDecoder:
    """Streaming HDLC decoder: NRZI decode, flag hunt, de-stuff, FCS check.

    Push line bits as they arrive; FCS-valid frames come back as
    :class:`FrameEvent`. Corrupt regions only bump :attr:`rejected` and
    the decoder resynchronizes on the next flag. State is owned by a
    single caller.
    """

    # Largest legal frame is 330 bytes (incl. 8 digipeaters and FCS);
    # anything past this between flags is garbage, not a slow frame.
    _MAX_FRAME_BITS = 4096

    def __init__(self, clock=time.time):
        self._clock = clock
        # Matches frame_to_linebits' idle level so a stream is decodable
        # from its very first bit; foreign streams resync on the preamble.
        self._level = 1
        self._ones = 0
        self._accum: list[int] = []
        self.rejected = 0
        self.frames_ok = 0

    def push(self, linebits, at: float | None = None) -> list[FrameEvent]:
        """Decode a chunk of line bits; ``at`` stamps completed frames."""
        events = []
        arr = np.asarray(linebits, dtype=np.uint8)
        if arr.size == 0:
            return events
        data = (arr == np.concatenate([[self._level], arr[:-1]])).astype(np.uint8)
        self._level = int(arr[-1])
        for bit in data:
            if bit:
                self._ones += 1
                if self._ones <= 6:
                    self._accum.append(1)
                elif self._ones == 7:
                    # Seven 1s: abort sequence, drop the partial frame.
                    if len(self._accum) > 7:
                        self.rejected += 1
                    self._accum = []
                continue
            if self._ones == 5:
                self._ones = 0  # stuffed zero, discard
                continue
            if self._ones == 6:
                # Closing 0 of a flag: frame content precedes 0111111.
                content = self._accum[:-7]
                self._accum = []
                self._ones = 0
                event = self._finish(content, at)
                if event:
                    events.append(event)
                continue
            self._ones = 0
            self._accum.append(0)
            if len(self._accum) > self._MAX_FRAME_BITS:
                self._accum = []
                self.rejected += 1
        return events

    def _finish(self, content_bits, at) -> FrameEvent | None:
        if not content_bits:
            return None
        if len(content_bits) % 8 or len(content_bits) < 136:
            self.rejected += 1
            return None
        raw = bits_to_bytes(np.array(content_bits, dtype=np.uint8))
        fcs_sent = struct.unpack("<H", raw[-2:])[0]
        if compute_fcs(raw[:-2]) != fcs_sent:
            self.rejected += 1
            return None
        try:
            frame = Ax25Frame.from_bytes(raw[:-2])
        except ValidationError:
            self.rejected += 1
            return None
        self.frames_ok += 1
        stamp = self._clock() if at is None else at
        return FrameEvent(frame=frame, received_at=stamp, raw=raw[:-2])


def linebits_to_frames(linebits, at: float | None = None) -> list[FrameEvent]:
    """One-shot decode of a complete line-bit stream."""
    return LinebitsDecoder().push(linebits, at=at)
