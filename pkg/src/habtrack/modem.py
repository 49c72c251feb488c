"""Software Bell 202 AFSK modem: 1200 baud, 1200 Hz mark / 2200 Hz space.

Modulation is continuous-phase FSK with a fractional-sample bit clock so
any supported sample rate works, integral samples-per-bit or not.

Demodulation runs two quadrature tone correlators (mark and space) over a
one-bit sliding window and recovers symbol timing from the discriminator's
tone transitions: every constant-tone segment is measured between observed
transitions and quantized to a whole number of bits. Because each segment
is anchored to measured edges rather than a free-running counter, clock
error never accumulates along the stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .audio import AudioBlock
from .errors import ConfigError, ValidationError


@dataclass(frozen=True)
class ModemConfig:
    """AFSK tone/rate parameters. Defaults are the Bell 202 standard."""

    sample_rate: int = 48000
    baud: float = 1200.0
    mark_hz: float = 1200.0
    space_hz: float = 2200.0
    highpass_hz: float = 100.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.baud <= 0 or self.mark_hz <= 0 or self.space_hz <= 0:
            raise ConfigError("baud and tone frequencies must be positive")
        if self.sample_rate < 4 * self.space_hz:
            raise ConfigError(
                f"sample rate {self.sample_rate} below 4x space tone "
                f"{self.space_hz}"
            )
        if self.samples_per_bit < 4:
            raise ConfigError("need at least 4 samples per bit")
        if not 0.0 < self.amplitude <= 1.0:
            raise ConfigError("amplitude must be in (0, 1]")

    @property
    def samples_per_bit(self) -> float:
        return self.sample_rate / self.baud


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValidationError("bits must be a flat sequence")
    if arr.size and arr.max() > 1:
        raise ValidationError("bits must be 0/1")
    return arr


def modulate(bits, cfg: ModemConfig = ModemConfig()) -> AudioBlock:
    """Render line bits as continuous-phase AFSK audio.

    Bit k occupies samples [floor(k*spb), floor((k+1)*spb)): boundaries
    come from a fractional accumulator, never per-bit rounding, so the
    average bit rate stays exact over any run length.
    """
    arr = _as_bits(bits)
    if arr.size == 0:
        return AudioBlock(np.zeros(0), cfg.sample_rate)

    spb = cfg.samples_per_bit
    edges = np.floor(np.arange(arr.size + 1) * spb + 1e-9).astype(np.int64)
    tone = np.where(arr == 1, cfg.mark_hz, cfg.space_hz)
    freq = np.repeat(tone, np.diff(edges))

    phase = 2.0 * np.pi * np.cumsum(freq) / cfg.sample_rate
    return AudioBlock(cfg.amplitude * np.sin(phase), cfg.sample_rate)


def add_noise(audio: AudioBlock, snr_db: float | None, seed: int = 0) -> AudioBlock:
    """Add white Gaussian noise at a given SNR relative to the block's power.

    ``snr_db=None`` returns the input unchanged. If the sum exceeds full
    scale the whole block is rescaled (SNR is a ratio, so it survives).
    Deterministic for a fixed (audio, snr_db, seed).
    """
    if len(audio) == 0:
        raise ValidationError("cannot add noise to empty audio")
    if snr_db is None:
        return audio
    signal_power = float(np.mean(audio.samples**2))
    if signal_power == 0.0:
        raise ValidationError("cannot scale noise against silent audio")
    noise_power = signal_power / (10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    noisy = audio.samples + rng.normal(0.0, np.sqrt(noise_power), len(audio))
    peak = float(np.max(np.abs(noisy)))
    if peak > 1.0:
        noisy = noisy / peak
    return AudioBlock(noisy, audio.sample_rate)


class Demodulator:
    """Streaming AFSK demodulator; one instance per audio stream.

    Feed blocks through :meth:`process` and finish with :meth:`flush`.
    All state (filter memory, correlator carry, the open tone segment)
    lives on the instance, so one owner can stream arbitrarily chunked
    audio and get the same bits as a one-shot decode.
    """

    # Segments shorter than this fraction of a bit are noise blips and get
    # absorbed into their neighbours instead of closing a segment.
    _MIN_SEGMENT_BITS = 0.3

    def __init__(self, cfg: ModemConfig = ModemConfig()):
        self.cfg = cfg
        self._spb = cfg.samples_per_bit
        window = max(4, int(round(self._spb)))
        self._window = window
        self._smooth = max(1, window // 8)
        # Everything downstream sees one effective window: correlation
        # span plus discriminator smoothing span.
        self._weff = window + self._smooth - 1
        if cfg.highpass_hz > 0:
            rc = 1.0 / (2.0 * np.pi * cfg.highpass_hz)
            alpha = rc / (rc + 1.0 / cfg.sample_rate)
            self._hp_ba = (np.array([alpha, -alpha]), np.array([1.0, -alpha]))
            self._hp_zi = np.zeros(1)
        else:
            self._hp_ba = None
            self._hp_zi = None
        self._carry = np.zeros(0)
        self._carry_start = 0  # absolute sample index of carry[0]
        self._disc_pos = 0  # absolute index of the next discriminator value
        # Open tone segment in discriminator coordinates.
        self._seg_start = 0.0
        self._seg_sign = 0
        self._last_sign = 0

    def process(self, audio: AudioBlock) -> np.ndarray:
        """Demodulate one block; returns the bits decided so far."""
        if audio.sample_rate != self.cfg.sample_rate:
            raise ConfigError(
                f"audio at {audio.sample_rate} Hz fed to a "
                f"{self.cfg.sample_rate} Hz demodulator"
            )
        return self._run(audio.samples)

    def flush(self) -> np.ndarray:
        """Close the stream and emit bits of the trailing open segment."""
        bits = self._run(np.zeros(0))
        return np.concatenate([bits, self._close_final()])

    # internals ---------------------------------------------------------

    def _run(self, samples: np.ndarray) -> np.ndarray:
        if self._hp_ba is not None and samples.size:
            samples, self._hp_zi = signal.lfilter(
                self._hp_ba[0], self._hp_ba[1], samples, zi=self._hp_zi
            )
        buf = np.concatenate([self._carry, samples])
        if buf.size < self._weff:
            self._carry = buf
            return np.zeros(0, dtype=np.uint8)

        disc = self._discriminator(buf)
        bits = self._segments_to_bits(disc)

        keep = self._weff - 1
        self._carry = buf[buf.size - keep :]
        self._carry_start += buf.size - keep
        self._disc_pos += disc.size
        return bits

    def _discriminator(self, buf: np.ndarray) -> np.ndarray:
        """Smoothed mark-vs-space energy difference per effective window."""
        w = self._window
        n = np.arange(
            self._carry_start, self._carry_start + buf.size, dtype=np.float64
        )

        def window_energy(tone_hz):
            omega = 2.0 * np.pi * tone_hz / self.cfg.sample_rate
            ci = np.concatenate([[0.0], np.cumsum(buf * np.cos(omega * n))])
            cq = np.concatenate([[0.0], np.cumsum(buf * np.sin(omega * n))])
            i = ci[w:] - ci[:-w]
            q = cq[w:] - cq[:-w]
            return i * i + q * q

        mark = window_energy(self.cfg.mark_hz)
        space = window_energy(self.cfg.space_hz)
        total = mark + space
        d = (mark - space) / np.where(total > 0.0, total, 1.0)
        k = self._smooth
        if k > 1:
            cs = np.concatenate([[0.0], np.cumsum(d)])
            d = (cs[k:] - cs[:-k]) / k
        return d

    def _segments_to_bits(self, disc: np.ndarray) -> np.ndarray:
        signs = np.where(disc >= 0.0, 1, -1)
        flips = np.flatnonzero(signs[1:] != signs[:-1]) + 1
        positions = (flips + self._disc_pos).astype(np.float64)
        after = signs[flips]
        if self._last_sign != 0 and signs[0] != self._last_sign:
            positions = np.concatenate([[float(self._disc_pos)], positions])
            after = np.concatenate([[signs[0]], after])
        self._last_sign = int(signs[-1])

        if self._seg_sign == 0:
            # Head correction: the first tone really started half an
            # effective window before the first discriminator value.
            self._seg_sign = int(signs[0])
            self._seg_start = self._disc_pos - self._weff / 2.0

        out: list[int] = []
        min_len = self._MIN_SEGMENT_BITS * self._spb
        for pos, sign_after in zip(positions, after):
            seg_len = pos - self._seg_start
            if seg_len < min_len:
                # Blip: keep the segment open, adopt the sign now in force.
                self._seg_sign = int(sign_after)
                continue
            nbits = int(round(seg_len / self._spb))
            out.extend([1 if self._seg_sign > 0 else 0] * nbits)
            self._seg_start = pos
            self._seg_sign = int(sign_after)
        return np.array(out, dtype=np.uint8)

    def _close_final(self) -> np.ndarray:
        if self._seg_sign == 0:
            return np.zeros(0, dtype=np.uint8)
        # Tail correction mirrors the head: the last tone extends half an
        # effective window past the final discriminator value.
        end = (self._disc_pos - 1) + self._weff / 2.0
        nbits = int(round((end - self._seg_start) / self._spb))
        bit = 1 if self._seg_sign > 0 else 0
        self._seg_sign = 0
        return np.array([bit] * nbits, dtype=np.uint8)


def demodulate(audio: AudioBlock, cfg: ModemConfig = ModemConfig()) -> np.ndarray:
    """One-shot demodulation of a complete block."""
    demod = Demodulator(cfg)
    bits = demod.process(audio)
    return np.concatenate([bits, demod.flush()])
