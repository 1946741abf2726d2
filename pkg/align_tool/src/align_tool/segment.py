"""Energy-based voiced-segment detection.

Frames the signal, thresholds frame RMS against the loudest frame, and
merges nearby active frames into word-level segments. Works on any audio
where words are separated by near-silence; it carries no language model,
so word identities must come from a reference transcript.
"""

from __future__ import annotations

import numpy as np

FRAME_SECONDS = 0.010
THRESHOLD_RATIO = 0.10  # relative to peak frame RMS
SILENCE_FLOOR = 1e-4  # absolute RMS below which audio counts as silent
MIN_GAP_SECONDS = 0.05
MIN_SEGMENT_SECONDS = 0.04


def frame_rms(samples: np.ndarray, rate: int) -> np.ndarray:
    frame = max(1, int(FRAME_SECONDS * rate))
    n = len(samples) // frame
    if n == 0:
        return np.zeros(0)
    trimmed = samples[: n * frame].reshape(n, frame)
    return np.sqrt(np.mean(trimmed * trimmed, axis=1))


def voiced_segments(samples: np.ndarray, rate: int) -> list[tuple[float, float]]:
    """Detect voiced (start, end) spans in seconds, in order."""
    rms = frame_rms(samples, rate)
    if len(rms) == 0:
        return []
    peak = float(rms.max())
    if peak < SILENCE_FLOOR:
        return []
    frame = max(1, int(FRAME_SECONDS * rate))
    active = rms >= max(THRESHOLD_RATIO * peak, SILENCE_FLOOR)

    segments = []
    start = None
    for i, on in enumerate(active):
        if on and start is None:
            start = i
        elif not on and start is not None:
            segments.append((start, i))
            start = None
    if start is not None:
        segments.append((start, len(active)))

    # merge segments split by sub-gap dips, then drop blips
    min_gap = MIN_GAP_SECONDS / FRAME_SECONDS
    merged = []
    for s, e in segments:
        if merged and s - merged[-1][1] < min_gap:
            merged[-1] = (merged[-1][0], e)
        else:
            merged.append((s, e))
    out = []
    for s, e in merged:
        start_s = s * frame / rate
        end_s = min(e * frame / rate, len(samples) / rate)
        if end_s - start_s >= MIN_SEGMENT_SECONDS:
            out.append((round(start_s, 6), round(end_s, 6)))
    return out
