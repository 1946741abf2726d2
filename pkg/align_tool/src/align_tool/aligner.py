"""Alignment production and export.

``align`` runs a speech backend over one audio file and emits an
AlignmentExport whose JSON form is exactly the harness's alignment
schema ({id, sample_rate, tokens}) plus a ``backend`` metadata block,
so the harness consumes exports without translation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import __version__, audio_io, postag, segment


class AlignError(Exception):
    pass


class BackendUnavailableError(AlignError):
    pass


class EmptyTranscriptionError(AlignError):
    pass


@dataclass(frozen=True)
class TokenRecord:
    text: str
    start: float
    end: float
    pos: str


@dataclass(frozen=True)
class AlignmentExport:
    instance_id: str
    sample_rate: int
    tokens: tuple
    asr_backend: str
    tagger: str
    mode: str  # free_transcription | forced_alignment

    def to_json(self) -> str:
        return json.dumps({
            "id": self.instance_id,
            "sample_rate": self.sample_rate,
            "tokens": [{"text": t.text, "start": t.start, "end": t.end,
                        "pos": t.pos} for t in self.tokens],
            "backend": {"asr_backend": self.asr_backend, "tagger": self.tagger,
                        "version": __version__, "mode": self.mode},
        }, indent=2) + "\n"


class EnergyBackend:
    """Word segmentation by signal energy; no recognizer.

    Sub-word output never occurs here (segments are whole words), but a
    recognizer backend plugging into the same two-method interface is
    expected to merge sub-word spans to word level before returning.
    """

    name = "energy_segmentation"

    def transcribe(self, samples, rate):
        raise BackendUnavailableError(
            "the energy backend cannot recognize words; supply a reference "
            "transcript (--reference) or plug in an ASR backend")

    def force_align(self, samples, rate, words):
        segments = segment.voiced_segments(samples, rate)
        if not segments:
            raise EmptyTranscriptionError("no voiced audio detected")
        if len(segments) != len(words):
            raise AlignError(
                f"found {len(segments)} voiced segments but the reference "
                f"has {len(words)} words")
        return [(w, s, e) for w, (s, e) in zip(words, segments)]


def align(audio_path, reference_text: str | None = None,
          backend=None) -> AlignmentExport:
    """Align one audio file; returns an AlignmentExport.

    With ``reference_text`` the forced-alignment path is used (preferred
    when the transcript is known); without it the backend must be able
    to transcribe freely.
    """
    backend = backend or EnergyBackend()
    rate, samples = audio_io.read_wav(audio_path)
    if reference_text is not None:
        words = reference_text.split()
        if not words:
            raise EmptyTranscriptionError(
                f"{audio_path}: reference transcript is empty")
        triples = backend.force_align(samples, rate, words)
        mode = "forced_alignment"
    else:
        triples = backend.transcribe(samples, rate)
        mode = "free_transcription"
    if not triples:
        raise EmptyTranscriptionError(f"{audio_path}: empty transcription")
    tokens = tuple(
        TokenRecord(text=w, start=float(s), end=float(e),
                    pos=postag.normalize_tag(postag.tag_word(w)))
        for w, s, e in triples)
    return AlignmentExport(
        instance_id=Path(audio_path).stem,
        sample_rate=rate,
        tokens=tokens,
        asr_backend=backend.name,
        tagger="closed_class_lexicon",
        mode=mode,
    )


def write_export(export: AlignmentExport, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dest = out_dir / f"{export.instance_id}.json"
    dest.write_text(export.to_json(), encoding="utf-8")
    return dest
