import math
import wave

import numpy as np
import pytest


def write_wav(path, samples, rate=16000):
    path.parent.mkdir(parents=True, exist_ok=True)
    pcm = np.clip(np.asarray(samples) * 32767.0, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(pcm.tobytes())


def tone_words(n_words, rate=16000, word_s=0.28, gap_s=0.12, lead_s=0.06):
    """Synthetic tone-per-word audio; returns (samples, expected spans)."""
    chunks = [np.zeros(int(lead_s * rate))]
    spans = []
    pos = int(lead_s * rate)
    word_n = int(word_s * rate)
    gap_n = int(gap_s * rate)
    for i in range(n_words):
        t = np.arange(word_n) / rate
        freq = 260.0 + 60.0 * i
        tone = 0.3 * np.sin(2 * math.pi * freq * t)
        ramp = int(0.01 * rate)
        tone[:ramp] *= np.linspace(0, 1, ramp)
        tone[-ramp:] *= np.linspace(1, 0, ramp)
        chunks.append(tone)
        spans.append((pos / rate, (pos + word_n) / rate))
        pos += word_n + gap_n
        chunks.append(np.zeros(gap_n))
    return np.concatenate(chunks), spans


@pytest.fixture
def tone_wav(tmp_path):
    samples, spans = tone_words(5)
    path = tmp_path / "utt.wav"
    write_wav(path, samples)
    return path, spans
