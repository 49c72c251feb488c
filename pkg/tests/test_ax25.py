import numpy as np
import pytest

from habtrack.ax25 import (
    Ax25Frame,
    Callsign,
    LinebitsDecoder,
    bit_stuff,
    bytes_to_bits,
    compute_fcs,
    decode_address,
    encode_address,
    frame_to_linebits,
    linebits_to_frames,
    nrzi_encode,
)
from habtrack.errors import ValidationError

from conftest import random_frame


def fcs_oracle(data: bytes) -> int:
    """Bit-serial LFSR form of the AX.25 FCS, written before the library
    implementation and kept independent of it."""
    register = 0xFFFF
    for byte in data:
        for i in range(8):  # LSB first
            bit = (byte >> i) & 1
            mix = (register ^ bit) & 1
            register >>= 1
            if mix:
                register ^= 0x8408
    return register ^ 0xFFFF


def test_fcs_check_value():
    assert fcs_oracle(b"123456789") == 0x906E  # oracle sanity first
    assert compute_fcs(b"123456789") == 0x906E


def test_fcs_empty():
    assert compute_fcs(b"") == 0x0000
    assert fcs_oracle(b"") == 0x0000


def test_fcs_matches_oracle(rng):
    for _ in range(2000):
        data = bytes(rng.integers(0, 256, int(rng.integers(0, 64))).astype(np.uint8))
        assert compute_fcs(data) == fcs_oracle(data)


def test_fcs_detects_single_bit_flips(rng):
    data = bytes(rng.integers(0, 256, 32).astype(np.uint8))
    reference = compute_fcs(data)
    for byte_index in range(len(data)):
        for bit in range(8):
            mutated = bytearray(data)
            mutated[byte_index] ^= 1 << bit
            assert compute_fcs(bytes(mutated)) != reference


def test_address_first_byte_shift():
    assert encode_address(Callsign("W3EAX", 12), last=False)[0] == 0xAE  # 'W' << 1


def test_address_padding():
    raw = encode_address(Callsign("A"), last=True)
    assert bytes(b >> 1 for b in raw[:6]) == b"A     "


def test_address_round_trip_exhaustive():
    for base in ("A", "W3EAX", "N0CALL", "K9"):
        for ssid in range(16):
            for last in (False, True):
                for repeated in (False, True):
                    cs = Callsign(base, ssid)
                    got = decode_address(encode_address(cs, last, repeated))
                    assert got == (cs, last, repeated)


def test_callsign_validation():
    with pytest.raises(ValidationError):
        Callsign("w3eax")  # lowercase
    with pytest.raises(ValidationError):
        Callsign("TOOLONGX")
    with pytest.raises(ValidationError):
        Callsign("OK", 16)


def test_callsign_text_round_trip():
    assert str(Callsign.parse("W3EAX-12")) == "W3EAX-12"
    assert str(Callsign.parse("W3EAX")) == "W3EAX"


def test_frame_round_trip_random(rng):
    for _ in range(1000):
        frame = random_frame(rng)
        events = linebits_to_frames(frame_to_linebits(frame, preamble_flags=2))
        assert len(events) == 1
        assert events[0].frame == frame


def test_stuffing_never_six_ones(rng):
    frame = random_frame(rng, max_info=256)
    stuffed = bit_stuff(bytes_to_bits(frame.to_bytes() + b"\xff\xff"))
    run = 0
    for bit in stuffed:
        run = run + 1 if bit else 0
        assert run < 6


def test_stuffing_count_oracle():
    # 256 x 0xFF info: count the insertions an independent scan expects.
    frame = Ax25Frame(
        destination=Callsign("APRS"),
        source=Callsign(base="W3EAX", ssid=12),
        info=b"\xff" * 256,
    )
    content = frame.to_bytes() + compute_fcs(frame.to_bytes()).to_bytes(2, "little")
    plain = bytes_to_bits(content)
    expected_insertions = 0
    run = 0
    for bit in plain:
        if bit:
            run += 1
            if run == 5:
                expected_insertions += 1
                run = 0
        else:
            run = 0
    assert len(bit_stuff(plain)) == len(plain) + expected_insertions


def test_back_to_back_frames_share_one_flag(rng):
    f1 = random_frame(rng)
    f2 = random_frame(rng)

    def stuffed_content(frame):
        content = frame.to_bytes()
        fcs = compute_fcs(content)
        return bit_stuff(bytes_to_bits(content + fcs.to_bytes(2, "little")))

    flag = bytes_to_bits(bytes([0x7E]))
    stream = np.concatenate([flag, stuffed_content(f1), flag, stuffed_content(f2), flag])
    events = linebits_to_frames(nrzi_encode(stream))
    assert [e.frame for e in events] == [f1, f2]


def test_flipped_bit_rejected(rng):
    # One payload bit flipped after the FCS was computed: the frame
    # arrives intact structurally but fails the checksum.
    frame = random_frame(rng, max_info=40)
    content = bytearray(frame.to_bytes())
    fcs = compute_fcs(bytes(content))
    content[len(content) // 2] ^= 0x10
    flag = bytes_to_bits(bytes([0x7E]))
    stuffed = bit_stuff(bytes_to_bits(bytes(content) + fcs.to_bytes(2, "little")))
    stream = nrzi_encode(np.concatenate([flag, flag, stuffed, flag]))
    decoder = LinebitsDecoder()
    assert decoder.push(stream) == []
    assert decoder.rejected == 1


def test_random_noise_bits_no_frames(rng):
    decoder = LinebitsDecoder()
    events = decoder.push(rng.integers(0, 2, 100_000))
    assert events == []


def test_streaming_equals_batch_decode(rng):
    frames = [random_frame(rng) for _ in range(20)]
    stream = np.concatenate([frame_to_linebits(f, preamble_flags=3) for f in frames])
    batch = [e.frame for e in linebits_to_frames(stream)]

    decoder = LinebitsDecoder()
    collected = []
    i = 0
    while i < len(stream):
        n = int(rng.integers(1, 700))
        collected += [e.frame for e in decoder.push(stream[i : i + n])]
        i += n
    assert collected == batch == frames


def test_tnc2_round_trip():
    frame = Ax25Frame(
        destination=Callsign("APRS"),
        source=Callsign("W3EAX", 12),
        digipeaters=((Callsign("WIDE1", 1), True), (Callsign("WIDE2", 1), False)),
        info=b"!3859.11N/07656.88WO test",
    )
    line = frame.to_tnc2()
    assert line == "W3EAX-12>APRS,WIDE1-1*,WIDE2-1:!3859.11N/07656.88WO test"
    assert Ax25Frame.from_tnc2(line) == frame


def test_non_ui_frame_tagged():
    frame = Ax25Frame(
        destination=Callsign("APRS"),
        source=Callsign("W3EAX"),
        control=0x2F,  # SABM, not UI
        info=b"",
    )
    events = linebits_to_frames(frame_to_linebits(frame, preamble_flags=2))
    assert len(events) == 1
    assert not events[0].frame.is_ui


def test_oversize_info_rejected():
    with pytest.raises(ValidationError):
        Ax25Frame(
            destination=Callsign("APRS"),
            source=Callsign("W3EAX"),
            info=b"x" * 257,
        )


def test_fcs_ok_flag_and_raw_bytes(rng):
    frame = random_frame(rng)
    event = linebits_to_frames(frame_to_linebits(frame))[0]
    assert event.fcs_ok
    assert event.raw == frame.to_bytes()
