"""Sample-accurate mono audio buffers, WAV I/O, and span editing.

Only 16-bit PCM mono WAV is accepted; callers pre-convert anything else.
Keeping a single canonical format makes span arithmetic exact and lets
tests compare outputs byte for byte.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class AudioError(Exception):
    """Base class for audio I/O and editing failures."""


class AudioFormatError(AudioError):
    """Input file is not 16-bit PCM mono WAV."""


@dataclass(frozen=True)
class SampleSpan:
    """Half-open sample range [start, end)."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid sample span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class AudioBuffer:
    """Immutable mono audio: float samples in [-1, 1] plus a sample rate."""

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional (mono)")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate


def read_audio(path) -> AudioBuffer:
    """Read a 16-bit PCM mono WAV file; samples scaled by 1/32768."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            frames = wf.readframes(wf.getnframes())
    except FileNotFoundError:
        raise
    except (wave.Error, EOFError) as exc:
        raise AudioFormatError(f"{path}: not a readable WAV file ({exc})") from exc
    if channels != 1:
        raise AudioFormatError(
            f"{path}: has {channels} channels; pre-convert to mono before use"
        )
    if width != 2:
        raise AudioFormatError(
            f"{path}: unsupported sample width {8 * width} bits (need 16-bit PCM)"
        )
    ints = np.frombuffer(frames, dtype="<i2")
    return AudioBuffer(sample_rate=rate, samples=ints.astype(np.float64) / 32768.0)


def write_audio(buffer: AudioBuffer, path) -> None:
    """Write 16-bit PCM mono WAV.

    Quantization rounds half away from zero and saturates at [-32768, 32767],
    so read(write(b)) reproduces b exactly once b is on the 16-bit grid.
    """
    ints = quantize16(buffer.samples)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(buffer.sample_rate)
        wf.writeframes(ints.astype("<i2").tobytes())


def quantize16(samples: np.ndarray) -> np.ndarray:
    """Map floats in [-1, 1] to int16, round-half-away-from-zero, saturating."""
    x = np.asarray(samples, dtype=np.float64)
    q = np.sign(x) * np.floor(np.abs(x) * 32768.0 + 0.5)
    return np.clip(q, -32768, 32767).astype(np.int64)


def replace_span(buffer: AudioBuffer, span: SampleSpan, fill) -> AudioBuffer:
    """Return a copy of ``buffer`` with ``span`` overwritten by ``fill``.

    Fill values are clamped to [-1, 1]; everything outside the span is
    bit-identical to the input.
    """
    if span.end > len(buffer):
        raise ValueError(
            f"span [{span.start}, {span.end}) exceeds buffer length {len(buffer)}"
        )
    fill = np.asarray(fill, dtype=np.float64)
    if len(fill) != len(span):
        raise ValueError(
            f"fill length {len(fill)} != span length {len(span)}"
        )
    out = buffer.samples.copy()
    out[span.start:span.end] = np.clip(fill, -1.0, 1.0)
    return AudioBuffer(sample_rate=buffer.sample_rate, samples=out)


def measure_rms(buffer: AudioBuffer, span: SampleSpan | None = None) -> float:
    """Root-mean-square amplitude of a span (whole buffer by default)."""
    if span is None:
        seg = buffer.samples
    else:
        if span.end > len(buffer):
            raise ValueError("span exceeds buffer length")
        seg = buffer.samples[span.start:span.end]
    if len(seg) == 0:
        raise ValueError("cannot measure RMS of an empty span")
    return float(np.sqrt(np.mean(np.square(seg))))


def span_from_seconds(start: float, end: float, sample_rate: int,
                      n_samples: int) -> SampleSpan:
    """Convert a time span to samples: floor start, ceil end, clamp.

    Conservative rounding guarantees the sample span fully covers the
    time span it came from.
    """
    lo = max(0, int(np.floor(start * sample_rate)))
    hi = min(n_samples, int(np.ceil(end * sample_rate)))
    if hi <= lo:
        raise ValueError(f"time span [{start}, {end}) maps to an empty sample span")
    return SampleSpan(lo, hi)
