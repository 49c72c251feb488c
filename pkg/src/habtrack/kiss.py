"""KISS TNC wire framing (FEND/FESC byte stuffing) over any byte stream."""

from __future__ import annotations

FEND = 0xC0
FESC = 0xDB
TFEND = 0xDC
TFESC = 0xDD

CMD_DATA = 0x00


def kiss_encode(frame: bytes, port: int = 0) -> bytes:
    """Wrap AX.25 frame bytes in a KISS data frame for TNC port 0-15."""
    if not 0 <= port <= 15:
        raise ValueError(f"KISS port {port} outside 0..15")
    out = bytearray([FEND, (port << 4) | CMD_DATA])
    for byte in frame:
        if byte == FEND:
            out += bytes([FESC, TFEND])
        elif byte == FESC:
            out += bytes([FESC, TFESC])
        else:
            out.append(byte)
    out.append(FEND)
    return bytes(out)


class KissDecoder:
    """Streaming, resynchronizing KISS deframer.

    Feed arbitrary chunks to :meth:`push`; complete data frames come back
    as (port, payload) tuples. Empty frames between FENDs are ignored and
    non-data command frames are skipped (counted in :attr:`skipped`).
    """

    def __init__(self):
        self._buf = bytearray()
        self._escaped = False
        self._in_frame = False
        self.skipped = 0

    def push(self, data: bytes) -> list[tuple[int, bytes]]:
        frames = []
        for byte in data:
            if byte == FEND:
                if self._in_frame and self._buf:
                    frame = self._take()
                    if frame is not None:
                        frames.append(frame)
                self._buf.clear()
                self._escaped = False
                self._in_frame = True
                continue
            if not self._in_frame:
                continue
            if self._escaped:
                if byte == TFEND:
                    self._buf.append(FEND)
                elif byte == TFESC:
                    self._buf.append(FESC)
                else:
                    # Invalid escape: drop the frame, resync at next FEND.
                    self.skipped += 1
                    self._buf.clear()
                    self._in_frame = False
                self._escaped = False
                continue
            if byte == FESC:
                self._escaped = True
                continue
            self._buf.append(byte)
        return frames

    def _take(self) -> tuple[int, bytes] | None:
        command = self._buf[0]
        if command & 0x0F != CMD_DATA:
            self.skipped += 1
            return None
        return (command >> 4, bytes(self._buf[1:]))


def kiss_decode(stream: bytes) -> list[tuple[int, bytes]]:
    """One-shot decode of a complete KISS byte stream."""
    return KissDecoder().push(stream)
