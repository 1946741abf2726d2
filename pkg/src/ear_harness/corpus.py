"""Corpus loading, alignment validation, and evaluation-triplet building.

Manifests are JSONL (one instance per line, fields id/audio/question/
answer/dataset). Alignments are one JSON document per instance with
word-level time spans and Universal POS tags. From each instance the
builder derives three realizations of the same question: the original
audio, a variant with one function word masked (still answerable), and a
variant with the answer span masked (unanswerable).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import masking
from .audio import read_audio, write_audio
from .masking import MaskConfig, MaskPlan
from .rng import derive_seed

UPOS_TAGS = frozenset(
    "ADJ ADP ADV AUX CCONJ DET INTJ NOUN NUM PART PRON PROPN PUNCT SCONJ SYM VERB X".split()
)

MANIFEST_FIELDS = ("id", "audio", "question", "answer", "dataset")


class CorpusError(Exception):
    pass


class ManifestError(CorpusError):
    pass


class AlignmentError(CorpusError):
    pass


@dataclass(frozen=True)
class EvalInstance:
    instance_id: str
    audio_path: str
    question: str
    answer: str
    dataset_tag: str


@dataclass(frozen=True)
class AlignedToken:
    text: str
    start: float
    end: float
    pos: str


@dataclass(frozen=True)
class AlignmentMap:
    instance_id: str
    sample_rate: int
    tokens: tuple

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))


@dataclass(frozen=True)
class Realization:
    condition: str  # original | invariant_masked | degrading_masked
    answerability: int
    audio_path: str
    mask_plan: MaskPlan | None = None

    def __post_init__(self):
        if self.condition not in ("original", "invariant_masked", "degrading_masked"):
            raise ValueError(f"unknown condition {self.condition!r}")
        if (self.condition == "degrading_masked") != (self.answerability == 0):
            raise ValueError("degrading_masked must be exactly the answerability-0 case")
        if (self.condition == "original") != (self.mask_plan is None):
            raise ValueError("original realizations (and only those) carry no mask plan")

    @property
    def fill_type(self) -> str:
        return self.mask_plan.fill_type if self.mask_plan else "none"


@dataclass(frozen=True)
class EvaluationTriplet:
    instance_id: str
    answerable: tuple  # (original, invariant_masked)
    unanswerable: Realization
    answer: str

    def __post_init__(self):
        if len(self.answerable) != 2 or any(r.answerability != 1 for r in self.answerable):
            raise ValueError("answerable side must be exactly two answerability-1 realizations")
        if self.unanswerable.answerability != 0:
            raise ValueError("unanswerable realization must have answerability 0")

    def realizations(self):
        return (*self.answerable, self.unanswerable)


def load_manifest(path) -> list[EvalInstance]:
    """Parse a JSONL manifest, preserving file order.

    Rejects malformed lines (with the line number), duplicate ids (naming
    both lines), and empty answers (naming the instance).
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    instances = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: malformed JSON ({exc})") from exc
            missing = [f for f in MANIFEST_FIELDS if f not in rec]
            if missing:
                raise ManifestError(
                    f"{path}:{lineno}: missing fields {', '.join(missing)}"
                )
            iid = str(rec["id"])
            if iid in seen:
                raise ManifestError(
                    f"{path}: duplicate instance id {iid!r} on lines "
                    f"{seen[iid]} and {lineno}"
                )
            seen[iid] = lineno
            if not str(rec["answer"]).strip():
                raise ManifestError(
                    f"{path}:{lineno}: instance {iid!r} has an empty answer"
                )
            instances.append(EvalInstance(
                instance_id=iid,
                audio_path=str(rec["audio"]),
                question=str(rec["question"]),
                answer=str(rec["answer"]),
                dataset_tag=str(rec["dataset"]),
            ))
    return instances


def load_alignment(path) -> AlignmentMap:
    """Load one alignment JSON document ({id, sample_rate, tokens})."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise AlignmentError(f"alignment file not found: {path}")
    except json.JSONDecodeError as exc:
        raise AlignmentError(f"{path}: malformed JSON ({exc})") from exc
    try:
        tokens = tuple(
            AlignedToken(text=str(t["text"]), start=float(t["start"]),
                         end=float(t["end"]), pos=str(t["pos"]))
            for t in doc["tokens"]
        )
        return AlignmentMap(
            instance_id=str(doc["id"]),
            sample_rate=int(doc["sample_rate"]),
            tokens=tokens,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise AlignmentError(f"{path}: bad alignment record ({exc})") from exc


def validate_alignment(instance: EvalInstance, alignment: AlignmentMap,
                       audio_duration: float) -> list[str]:
    """Check alignment invariants; returns one entry per violation.

    An empty report means the alignment is valid. An id mismatch is a
    hard error, not a report entry.
    """
    if alignment.instance_id != instance.instance_id:
        raise AlignmentError(
            f"alignment id {alignment.instance_id!r} does not match "
            f"instance {instance.instance_id!r}"
        )
    report = []
    eps = 1e-9
    prev = None
    for i, tok in enumerate(alignment.tokens):
        where = f"token {i} ({tok.text!r})"
        if tok.end <= tok.start:
            report.append(f"{where}: empty or reversed span [{tok.start}, {tok.end})")
        if tok.start < -eps or tok.end > audio_duration + eps:
            report.append(
                f"{where}: span [{tok.start}, {tok.end}) outside audio "
                f"[0, {audio_duration})"
            )
        if tok.pos not in UPOS_TAGS:
            report.append(f"{where}: unknown POS tag {tok.pos!r}")
        if prev is not None:
            if tok.start < prev.start - eps:
                report.append(f"{where}: tokens out of order")
            elif tok.start < prev.end - eps:
                report.append(
                    f"{where}: overlaps previous span [{prev.start}, {prev.end})"
                )
        prev = tok
    return report


def masked_audio_name(instance_id: str, condition: str, fill_type: str) -> str:
    return f"{instance_id}.{condition}.{fill_type}.wav"


def build_triplet(instance: EvalInstance, alignment: AlignmentMap,
                  config: MaskConfig, seed: int, run_dir) -> EvaluationTriplet:
    """Build and persist the three realizations for one instance.

    Deterministic in (instance, alignment, config, seed): mask plans and
    the bytes of the written WAV files are reproduced exactly on re-run.
    Masked audio lands in ``run_dir/masked/``.
    """
    buffer = read_audio(instance.audio_path)
    problems = validate_alignment(instance, alignment, buffer.duration_seconds)
    if problems:
        raise AlignmentError(
            f"instance {instance.instance_id!r}: invalid alignment: "
            + "; ".join(problems)
        )
    inst_seed = derive_seed(seed, instance.instance_id)
    degrading = masking.plan_degrading_mask(
        alignment, instance.answer, config, buffer.duration_seconds,
        seed=derive_seed(inst_seed, "degrading"),
    )
    invariant = masking.plan_invariant_mask(
        alignment, instance.answer, config, seed=derive_seed(inst_seed, "invariant"),
    )

    masked_dir = Path(run_dir) / "masked"
    paths = {}
    for plan, condition in ((invariant, "invariant_masked"),
                            (degrading, "degrading_masked")):
        out = masking.apply_mask(buffer, plan, config)
        dest = masked_dir / masked_audio_name(
            instance.instance_id, condition, plan.fill_type)
        write_audio(out, dest)
        paths[condition] = str(dest)

    return EvaluationTriplet(
        instance_id=instance.instance_id,
        answerable=(
            Realization("original", 1, instance.audio_path),
            Realization("invariant_masked", 1, paths["invariant_masked"], invariant),
        ),
        unanswerable=Realization(
            "degrading_masked", 0, paths["degrading_masked"], degrading),
        answer=instance.answer,
    )
