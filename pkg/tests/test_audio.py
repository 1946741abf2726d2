import wave

import numpy as np
import pytest

from ear_harness.audio import (
    AudioBuffer,
    AudioFormatError,
    SampleSpan,
    measure_rms,
    quantize16,
    read_audio,
    replace_span,
    span_from_seconds,
    write_audio,
)
from ear_harness.rng import uniform_array


def _write_raw_wav(path, ints, rate=16000, channels=1, width=2):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(width)
        wf.setframerate(rate)
        wf.writeframes(np.asarray(ints, dtype="<i2").tobytes())


def test_read_silence(tmp_path):
    p = tmp_path / "s.wav"
    _write_raw_wav(p, np.zeros(16000, dtype=np.int16))
    buf = read_audio(p)
    assert buf.sample_rate == 16000
    assert len(buf) == 16000
    assert np.all(buf.samples == 0.0)
    assert buf.duration_seconds == pytest.approx(1.0)


def test_read_full_scale_square_wave(tmp_path):
    p = tmp_path / "sq.wav"
    _write_raw_wav(p, np.full(100, 32767, dtype=np.int16))
    buf = read_audio(p)
    assert np.all(buf.samples == 32767 / 32768)


def test_read_rejects_stereo(tmp_path):
    p = tmp_path / "st.wav"
    _write_raw_wav(p, np.zeros(200, dtype=np.int16), channels=2)
    with pytest.raises(AudioFormatError, match="mono"):
        read_audio(p)


def test_read_rejects_wrong_bit_depth(tmp_path):
    p = tmp_path / "b8.wav"
    with wave.open(str(p), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(1)
        wf.setframerate(8000)
        wf.writeframes(bytes(100))
    with pytest.raises(AudioFormatError, match="16-bit"):
        read_audio(p)


def test_read_rejects_non_wav(tmp_path):
    p = tmp_path / "x.wav"
    p.write_bytes(b"definitely not riff data")
    with pytest.raises(AudioFormatError):
        read_audio(p)


def test_round_trip_zero_buffer(tmp_path):
    buf = AudioBuffer(8000, np.zeros(800))
    p = tmp_path / "z.wav"
    write_audio(buf, p)
    back = read_audio(p)
    assert back.sample_rate == 8000
    assert np.array_equal(back.samples, buf.samples)


def test_round_trip_idempotent_after_one_quantization(tmp_path):
    # a noise buffer quantizes once; the second round trip is lossless
    noise = uniform_array(42, 4000) * 0.8
    p1 = tmp_path / "n1.wav"
    p2 = tmp_path / "n2.wav"
    write_audio(AudioBuffer(16000, noise), p1)
    once = read_audio(p1)
    write_audio(once, p2)
    twice = read_audio(p2)
    assert np.array_equal(once.samples, twice.samples)


def test_positive_full_scale_saturates_to_32767():
    assert quantize16(np.array([1.0]))[0] == 32767
    assert quantize16(np.array([-1.0]))[0] == -32768


def test_quantize_rounds_half_away_from_zero():
    assert quantize16(np.array([0.5 / 32768]))[0] == 1
    assert quantize16(np.array([-0.5 / 32768]))[0] == -1
    assert quantize16(np.array([0.49 / 32768]))[0] == 0


def test_replace_span_basic():
    buf = AudioBuffer(16000, np.ones(16000) * 0.25)
    out = replace_span(buf, SampleSpan(4000, 8000), np.zeros(4000))
    assert len(out) == len(buf)
    assert np.all(out.samples[4000:8000] == 0.0)
    assert np.array_equal(out.samples[:4000], buf.samples[:4000])
    assert np.array_equal(out.samples[8000:], buf.samples[8000:])


def test_replace_span_identity():
    buf = AudioBuffer(16000, uniform_array(1, 1000) * 0.5)
    out = replace_span(buf, SampleSpan(0, 1000), buf.samples)
    assert np.array_equal(out.samples, buf.samples)


def test_replace_span_length_mismatch():
    buf = AudioBuffer(16000, np.zeros(100))
    with pytest.raises(ValueError, match="length"):
        replace_span(buf, SampleSpan(0, 10), np.zeros(5))


def test_replace_span_out_of_range():
    buf = AudioBuffer(16000, np.zeros(100))
    with pytest.raises(ValueError):
        replace_span(buf, SampleSpan(50, 150), np.zeros(100))


def test_replace_span_clamps_fill():
    buf = AudioBuffer(16000, np.zeros(10))
    out = replace_span(buf, SampleSpan(0, 10), np.full(10, 3.0))
    assert np.all(out.samples == 1.0)


def test_rms_all_zero():
    assert measure_rms(AudioBuffer(16000, np.zeros(100))) == 0.0


def test_rms_constant():
    assert measure_rms(AudioBuffer(16000, np.full(100, 0.5))) == pytest.approx(0.5)


def test_rms_alternating_sign():
    samples = np.tile([0.5, -0.5], 50)
    assert measure_rms(AudioBuffer(16000, samples)) == pytest.approx(0.5)


def test_rms_empty_span_rejected():
    buf = AudioBuffer(16000, np.zeros(0))
    with pytest.raises(ValueError):
        measure_rms(buf)


def test_span_from_seconds_floor_ceil_clamp():
    span = span_from_seconds(0.25, 0.5, 16000, 16000)
    assert (span.start, span.end) == (4000, 8000)
    span = span_from_seconds(0.1001, 0.1999, 10, 10)
    assert (span.start, span.end) == (1, 2)
    span = span_from_seconds(0.9, 2.0, 16000, 16000)
    assert span.end == 16000


def test_sample_span_validation():
    with pytest.raises(ValueError):
        SampleSpan(5, 5)
    with pytest.raises(ValueError):
        SampleSpan(-1, 5)
