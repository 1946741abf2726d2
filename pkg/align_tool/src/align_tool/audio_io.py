"""Minimal mono 16-bit PCM WAV reading.

The tool is deliberately independent of the harness package, so it reads
the same audio format (the harness's documented input format) with its
own few lines of stdlib ``wave`` code.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np


class AudioReadError(Exception):
    pass


def read_wav(path) -> tuple[int, np.ndarray]:
    """Read a mono 16-bit WAV; returns (sample_rate, float samples in [-1, 1])."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1:
                raise AudioReadError(f"{path}: expected mono audio")
            if wf.getsampwidth() != 2:
                raise AudioReadError(f"{path}: expected 16-bit PCM")
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise AudioReadError(f"{path}: not a readable WAV file ({exc})") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return rate, samples
