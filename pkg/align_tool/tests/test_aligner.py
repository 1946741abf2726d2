import json

import numpy as np
import pytest

from align_tool.aligner import (
    AlignError,
    BackendUnavailableError,
    EmptyTranscriptionError,
    align,
    write_export,
)

from conftest import write_wav


def test_forced_alignment_structure(tone_wav):
    path, spans = tone_wav
    export = align(path, reference_text="i like steak the most")
    assert len(export.tokens) == 5
    texts = [t.text for t in export.tokens]
    assert texts == ["i", "like", "steak", "the", "most"]
    assert export.tokens[3].pos == "DET"
    starts = [t.start for t in export.tokens]
    assert starts == sorted(starts)
    for tok in export.tokens:
        assert tok.end > tok.start
    assert export.mode == "forced_alignment"


def test_silent_audio_refused(tmp_path):
    path = tmp_path / "silent.wav"
    write_wav(path, np.zeros(16000))
    with pytest.raises(EmptyTranscriptionError):
        align(path, reference_text="one two")


def test_word_count_mismatch(tone_wav):
    path, _ = tone_wav
    with pytest.raises(AlignError, match="5 voiced segments"):
        align(path, reference_text="too few words")


def test_free_transcription_needs_recognizer(tone_wav):
    path, _ = tone_wav
    with pytest.raises(BackendUnavailableError):
        align(path)


def test_export_schema(tone_wav, tmp_path):
    path, _ = tone_wav
    export = align(path, reference_text="we will meet on tuesday")
    dest = write_export(export, tmp_path / "out")
    doc = json.loads(dest.read_text())
    assert set(doc) == {"id", "sample_rate", "tokens", "backend"}
    assert doc["id"] == "utt"
    assert doc["sample_rate"] == 16000
    for tok in doc["tokens"]:
        assert set(tok) == {"text", "start", "end", "pos"}
    assert doc["backend"]["mode"] == "forced_alignment"
    assert doc["backend"]["asr_backend"] == "energy_segmentation"
