"""Bundled synthetic fixture corpus.

Ten short two-speaker-style utterances are synthesized deterministically:
each word is a pure tone (frequency derived from the word) separated by
short silences, so word boundaries are exact by construction and the
hand-written alignments are ground truth. Real corpora are never
redistributed; these fixtures make the whole pipeline testable offline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, write_audio

SAMPLE_RATE = 16000
WORD_SECONDS = 0.28
GAP_SECONDS = 0.12
LEAD_SECONDS = 0.06
AMPLITUDE = 0.28

# text, POS tags (parallel to the words), question, answer
FIXTURE_ITEMS = [
    ("my favorite food is pasta what is your favorite food i like steak the most",
     "PRON ADJ NOUN AUX NOUN PRON AUX PRON ADJ NOUN PRON VERB NOUN DET ADV",
     "What is the second speaker's favorite food?", "steak"),
    ("i really like miami which city do you like the most boston is my favorite city",
     "PRON ADV VERB PROPN DET NOUN AUX PRON VERB DET ADV PROPN AUX PRON ADJ NOUN",
     "Which city does the second speaker like the most?", "boston"),
    ("the wall in the kitchen is painted green",
     "DET NOUN ADP DET NOUN AUX VERB ADJ",
     "What color is the kitchen wall painted?", "green"),
    ("we will meet on tuesday at the station",
     "PRON AUX VERB ADP PROPN ADP DET NOUN",
     "On which day will they meet?", "tuesday"),
    ("my brother plays the guitar in a band",
     "PRON NOUN VERB DET NOUN ADP DET NOUN",
     "Which instrument does the brother play?", "guitar"),
    ("she traveled to new york last summer",
     "PRON VERB ADP PROPN PROPN ADJ NOUN",
     "Where did she travel last summer?", "new york"),
    ("the meeting starts at nine in the morning",
     "DET NOUN VERB ADP NUM ADP DET NOUN",
     "At what time does the meeting start?", "nine"),
    ("he ordered coffee and a sandwich for lunch",
     "PRON VERB NOUN CCONJ DET NOUN ADP NOUN",
     "Which drink did he order for lunch?", "coffee"),
    ("our train leaves from platform seven",
     "PRON NOUN VERB ADP NOUN NUM",
     "From which platform does the train leave?", "seven"),
    ("they adopted a small black cat named luna",
     "PRON VERB DET ADJ ADJ NOUN VERB PROPN",
     "What is the cat's name?", "luna"),
]


@dataclass(frozen=True)
class FixtureCorpus:
    root: Path
    manifest_path: Path
    alignment_dir: Path
    asset_bank: Path
    instance_ids: tuple


def word_frequency(word: str) -> float:
    """Stable tone frequency for a word, in 220-820 Hz."""
    h = 0
    for ch in word:
        h = (h * 31 + ord(ch)) % 600
    return 220.0 + h


def render_word(word: str, n: int) -> np.ndarray:
    t = np.arange(n) / SAMPLE_RATE
    tone = AMPLITUDE * np.sin(2 * np.pi * word_frequency(word) * t)
    ramp = min(n // 8, int(0.01 * SAMPLE_RATE))
    if ramp > 0:  # short fades avoid clicks at word edges
        env = np.ones(n)
        env[:ramp] = np.linspace(0.0, 1.0, ramp)
        env[-ramp:] = np.linspace(1.0, 0.0, ramp)
        tone *= env
    return tone


def synthesize_utterance(words) -> tuple[AudioBuffer, list]:
    """Tone-per-word audio plus exact (start, end) spans in seconds."""
    word_n = int(WORD_SECONDS * SAMPLE_RATE)
    gap_n = int(GAP_SECONDS * SAMPLE_RATE)
    lead_n = int(LEAD_SECONDS * SAMPLE_RATE)
    chunks = [np.zeros(lead_n)]
    spans = []
    pos = lead_n
    for i, word in enumerate(words):
        chunks.append(render_word(word, word_n))
        spans.append((pos / SAMPLE_RATE, (pos + word_n) / SAMPLE_RATE))
        pos += word_n
        chunks.append(np.zeros(gap_n))
        pos += gap_n
    samples = np.concatenate(chunks)
    return AudioBuffer(sample_rate=SAMPLE_RATE, samples=samples), spans


def _write_asset_bank(root: Path) -> None:
    t = np.arange(SAMPLE_RATE) / SAMPLE_RATE  # 1 s assets
    chord = 0.2 * (np.sin(2 * np.pi * 220 * t)
                   + 0.8 * np.sin(2 * np.pi * 277 * t)
                   + 0.6 * np.sin(2 * np.pi * 330 * t)) / 2.4
    write_audio(AudioBuffer(SAMPLE_RATE, chord), root / "music" / "chord_a.wav")
    # crude other-speaker stand-in: alternating formant-like bursts
    burst = np.sin(2 * np.pi * 140 * t) * (0.5 + 0.5 * np.sign(np.sin(2 * np.pi * 4 * t)))
    speech = 0.22 * burst * (1.0 + 0.3 * np.sin(2 * np.pi * 2.5 * t))
    write_audio(AudioBuffer(SAMPLE_RATE, speech),
                root / "multi_speaker" / "speaker_b.wav")


def build_fixture_corpus(root, n_instances: int = 10) -> FixtureCorpus:
    """Materialize the fixture corpus under ``root``.

    Layout: audio/<id>.wav, alignments/<id>.json, manifest.jsonl, and an
    assets/ bank with music/ and multi_speaker/ subdirectories.
    """
    root = Path(root)
    audio_dir = root / "audio"
    align_dir = root / "alignments"
    audio_dir.mkdir(parents=True, exist_ok=True)
    align_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = root / "manifest.jsonl"
    ids = []
    with open(manifest_path, "w", encoding="utf-8") as mf:
        for i, (text, pos_tags, question, answer) in enumerate(
                FIXTURE_ITEMS[:n_instances]):
            iid = f"fx{i:03d}"
            ids.append(iid)
            words = text.split()
            tags = pos_tags.split()
            assert len(words) == len(tags), iid
            buffer, spans = synthesize_utterance(words)
            wav_path = audio_dir / f"{iid}.wav"
            write_audio(buffer, wav_path)
            alignment = {
                "id": iid,
                "sample_rate": SAMPLE_RATE,
                "tokens": [
                    {"text": w, "start": round(s, 6), "end": round(e, 6), "pos": p}
                    for w, p, (s, e) in zip(words, tags, spans)
                ],
            }
            (align_dir / f"{iid}.json").write_text(
                json.dumps(alignment, indent=2) + "\n", encoding="utf-8")
            mf.write(json.dumps({
                "id": iid,
                "audio": str(wav_path),
                "question": question,
                "answer": answer,
                "dataset": "fixture",
            }) + "\n")
    asset_bank = root / "assets"
    _write_asset_bank(asset_bank)
    return FixtureCorpus(
        root=root, manifest_path=manifest_path, alignment_dir=align_dir,
        asset_bank=asset_bank, instance_ids=tuple(ids))
