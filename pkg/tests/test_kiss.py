import numpy as np
import pytest

from habtrack.kiss import FEND, FESC, KissDecoder, kiss_decode, kiss_encode


def test_round_trip_with_escape_bytes():
    payload = bytes([0x01, FEND, 0x02, FESC, 0x03, FEND, FESC])
    frames = kiss_decode(kiss_encode(payload, port=0))
    assert frames == [(0, payload)]


def test_port_nibble():
    frames = kiss_decode(kiss_encode(b"hello", port=5))
    assert frames == [(5, b"hello")]
    with pytest.raises(ValueError):
        kiss_encode(b"x", port=16)


def test_empty_frames_between_fends_ignored():
    stream = bytes([FEND, FEND, FEND]) + kiss_encode(b"data") + bytes([FEND])
    frames = kiss_decode(stream)
    assert frames == [(0, b"data")]


def test_unknown_command_skipped_with_counter():
    weird = bytes([FEND, 0x05, 0x01, 0x02, FEND])  # command nibble 5
    decoder = KissDecoder()
    assert decoder.push(weird) == []
    assert decoder.skipped == 1
    assert decoder.push(kiss_encode(b"ok")) == [(0, b"ok")]


def test_chunked_stream_recovers_all_frames(rng):
    payloads = [
        bytes(rng.integers(0, 256, int(rng.integers(1, 80))).astype(np.uint8))
        for _ in range(100)
    ]
    stream = b"".join(kiss_encode(p) for p in payloads)
    decoder = KissDecoder()
    collected = []
    i = 0
    while i < len(stream):
        n = int(rng.integers(1, 37))
        collected += decoder.push(stream[i : i + n])
        i += n
    assert [p for _, p in collected] == payloads


def test_resync_after_garbage():
    decoder = KissDecoder()
    # Garbage before any FEND is discarded silently.
    assert decoder.push(b"\x01\x02\x03") == []
    assert decoder.push(kiss_encode(b"good")) == [(0, b"good")]
