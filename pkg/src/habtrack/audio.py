"""PCM audio containers and WAV/raw file handling.

Only two on-disk forms are accepted: RIFF WAV (16-bit little-endian
mono PCM) and headerless 16-bit little-endian mono PCM with the sample
rate supplied out-of-band.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

SUPPORTED_RATES = (8000, 11025, 22050, 44100, 48000)

_INT16_FULL_SCALE = 32767.0


@dataclass(frozen=True)
class AudioBlock:
    """Mono PCM samples, normalized to [-1, 1], with their sample rate."""

    samples: np.ndarray
    sample_rate: int
    _validated: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate not in SUPPORTED_RATES:
            raise ValidationError(
                f"sample rate {self.sample_rate} not in {SUPPORTED_RATES}"
            )
        if samples.ndim != 1:
            raise ValidationError("audio must be a 1-D mono sample array")
        if samples.size and (np.max(samples) > 1.0 or np.min(samples) < -1.0):
            raise ValidationError("samples must lie within [-1.0, 1.0]")

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


def read_wav(path) -> AudioBlock:
    """Load a 16-bit mono PCM WAV file."""
    with wave.open(str(path), "rb") as wav:
        if wav.getnchannels() != 1:
            raise ValidationError("only mono WAV input is supported")
        if wav.getsampwidth() != 2:
            raise ValidationError("only 16-bit PCM WAV input is supported")
        rate = wav.getframerate()
        raw = wav.readframes(wav.getnframes())
    return pcm16_to_block(raw, rate)


def write_wav(path, block: AudioBlock) -> None:
    """Write a block as 16-bit mono PCM WAV."""
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(block.sample_rate)
        wav.writeframes(block_to_pcm16(block))


def pcm16_to_block(raw: bytes, sample_rate: int) -> AudioBlock:
    """Interpret raw little-endian int16 bytes as an AudioBlock.

    Divides by 32768 so int16 minimum maps inside [-1, 1].
    """
    ints = np.frombuffer(raw, dtype="<i2")
    return AudioBlock(ints.astype(np.float64) / 32768.0, sample_rate)


def block_to_pcm16(block: AudioBlock) -> bytes:
    """Quantize to little-endian int16 bytes."""
    clipped = np.clip(block.samples, -1.0, 1.0)
    return (np.round(clipped * _INT16_FULL_SCALE).astype("<i2")).tobytes()
