"""Span-level audio masking: plan which words to cover and render the fill.

Two mask conditions exist. A *degrading* mask covers every aligned
occurrence of the ground-truth answer, making the audio unanswerable. An
*invariant* mask covers one randomly chosen function word, perturbing the
acoustics without touching the answer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, SampleSpan, measure_rms, read_audio, replace_span, span_from_seconds
from .rng import Xorshift64Star, derive_seed, uniform_array
from .textnorm import normalize, norm_tokens

log = logging.getLogger(__name__)

FILL_TYPES = ("silence", "white_noise", "music", "multi_speaker")

# Closed grammatical categories (Universal POS tags) eligible for
# invariant masking.
DEFAULT_FUNCTION_WORD_POS = frozenset(
    {"DET", "ADP", "AUX", "CCONJ", "SCONJ", "PRON", "PART"}
)


class MaskingError(Exception):
    pass


class AnswerNotAlignedError(MaskingError):
    """The answer text has no verbatim occurrence in the alignment."""


class NoEligibleTokenError(MaskingError):
    """No function word outside the answer span is available to mask."""


@dataclass(frozen=True)
class MaskConfig:
    fill_type: str = "white_noise"
    expansion_margin: float = 0.0
    noise_gain_mode: str = "matched_rms"  # or "fixed_gain"
    fixed_gain: float = 0.05
    asset_bank: str | None = None  # dir with music/ and multi_speaker/ subdirs
    function_word_pos_set: frozenset = DEFAULT_FUNCTION_WORD_POS
    forbid_answer_adjacent: bool = False  # strictness knob for invariant masks

    def __post_init__(self):
        if self.fill_type not in FILL_TYPES:
            raise ValueError(f"unknown fill_type {self.fill_type!r}")
        if self.expansion_margin < 0:
            raise ValueError("expansion_margin must be >= 0")
        if self.noise_gain_mode not in ("matched_rms", "fixed_gain"):
            raise ValueError(f"unknown noise_gain_mode {self.noise_gain_mode!r}")
        object.__setattr__(
            self, "function_word_pos_set", frozenset(self.function_word_pos_set)
        )


@dataclass(frozen=True)
class MaskPlan:
    condition: str  # "invariant" | "degrading"
    spans: tuple  # ((start_s, end_s), ...) in seconds
    fill_type: str
    seed: int
    masked_tokens: tuple

    def total_width(self) -> float:
        return sum(e - s for s, e in self.spans)


def find_answer_token_runs(alignment, answer: str) -> list[tuple[int, int]]:
    """Locate every occurrence of ``answer`` in the alignment tokens.

    Matching is case-insensitive over punctuation-stripped tokens; a
    multi-word answer must match consecutive tokens. Returns half-open
    token index ranges; raises if the answer never occurs.
    """
    want = norm_tokens(answer)
    if not want:
        raise AnswerNotAlignedError(f"answer {answer!r} normalizes to nothing")
    have = [normalize(t.text) for t in alignment.tokens]
    runs = []
    for i in range(len(have) - len(want) + 1):
        if have[i:i + len(want)] == want:
            runs.append((i, i + len(want)))
    if not runs:
        raise AnswerNotAlignedError(
            f"answer {answer!r} does not occur in alignment "
            f"{alignment.instance_id!r}"
        )
    return runs


def answer_time_spans(alignment, answer: str) -> list[tuple[float, float]]:
    """Merged time spans of all aligned answer occurrences (no margin)."""
    spans = []
    for lo, hi in find_answer_token_runs(alignment, answer):
        spans.append((alignment.tokens[lo].start, alignment.tokens[hi - 1].end))
    return merge_spans(spans)


def merge_spans(spans) -> list[tuple[float, float]]:
    """Union of time spans; overlapping or touching spans are coalesced."""
    out = []
    for s, e in sorted(spans):
        if out and s <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], e))
        else:
            out.append((s, e))
    return out


def _spans_intersect(a, b) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def plan_degrading_mask(alignment, answer: str, config: MaskConfig,
                        audio_duration: float, seed: int = 0) -> MaskPlan:
    """Plan spans covering every aligned answer occurrence.

    Each occurrence is widened by the expansion margin on both sides,
    clamped to the audio bounds, and overlapping spans are merged.
    """
    runs = find_answer_token_runs(alignment, answer)
    spans = []
    tokens = []
    for lo, hi in runs:
        start = alignment.tokens[lo].start - config.expansion_margin
        end = alignment.tokens[hi - 1].end + config.expansion_margin
        spans.append((max(0.0, start), min(audio_duration, end)))
        tokens.extend(t.text for t in alignment.tokens[lo:hi])
    return MaskPlan(
        condition="degrading",
        spans=tuple(merge_spans(spans)),
        fill_type=config.fill_type,
        seed=seed,  # span choice is deterministic; the seed only drives fills
        masked_tokens=tuple(tokens),
    )


def plan_invariant_mask(alignment, answer: str, config: MaskConfig,
                        seed: int) -> MaskPlan:
    """Plan a single-function-word mask that never touches the answer.

    The token is drawn uniformly from the eligible list with the seeded
    generator: selection = eligible[Xorshift64Star(seed).randint(len)].
    """
    protected = answer_time_spans(alignment, answer)
    if config.forbid_answer_adjacent:
        protected = [(s - 1e-9, e + 1e-9) for s, e in protected]
    eligible = [
        i for i, t in enumerate(alignment.tokens)
        if t.pos in config.function_word_pos_set
        and not any(_spans_intersect((t.start, t.end), p) for p in protected)
    ]
    if not eligible:
        raise NoEligibleTokenError(
            f"instance {alignment.instance_id!r}: no function word outside "
            f"the answer span is available for invariant masking"
        )
    idx = eligible[Xorshift64Star(seed).randint(len(eligible))]
    tok = alignment.tokens[idx]
    return MaskPlan(
        condition="invariant",
        spans=((tok.start, tok.end),),
        fill_type=config.fill_type,
        seed=seed,
        masked_tokens=(tok.text,),
    )


def _asset_files(config: MaskConfig, fill_type: str) -> list[Path]:
    if not config.asset_bank:
        raise MaskingError(f"fill_type {fill_type!r} needs an asset bank")
    bank = Path(config.asset_bank) / fill_type
    files = sorted(bank.glob("*.wav"))  # lexicographic order fixes seeded indexing
    if not files:
        raise MaskingError(f"asset bank {bank} is empty")
    return files


def _target_rms(context: AudioBuffer, span: SampleSpan, config: MaskConfig,
                fill_type: str) -> float:
    if config.noise_gain_mode == "fixed_gain":
        return config.fixed_gain
    rms = measure_rms(context, span)
    if rms == 0.0:
        log.warning(
            "masked span has zero RMS; falling back to fixed_gain=%g for %s fill",
            config.fixed_gain, fill_type,
        )
        return config.fixed_gain
    return rms


def render_fill(fill_type: str, length: int, context: AudioBuffer,
                span: SampleSpan, config: MaskConfig, seed: int) -> np.ndarray:
    """Synthesize exactly ``length`` fill samples for one masked span."""
    if length <= 0:
        raise ValueError("fill length must be positive")
    if fill_type == "silence":
        return np.zeros(length)
    target = _target_rms(context, span, config, fill_type)
    if fill_type == "white_noise":
        raw = uniform_array(seed, length)
        rms = float(np.sqrt(np.mean(np.square(raw)))) or 1.0
        return np.clip(raw * (target / rms), -1.0, 1.0)
    if fill_type in ("music", "multi_speaker"):
        files = _asset_files(config, fill_type)
        rng = Xorshift64Star(seed)
        asset = read_audio(files[rng.randint(len(files))]).samples
        offset = rng.randint(len(asset))
        raw = np.take(asset, (offset + np.arange(length)) % len(asset))
        rms = float(np.sqrt(np.mean(np.square(raw))))
        if rms > 0:
            raw = raw * (target / rms)
        return np.clip(raw, -1.0, 1.0)
    raise ValueError(f"unknown fill_type {fill_type!r}")


def apply_mask(buffer: AudioBuffer, plan: MaskPlan,
               config: MaskConfig) -> AudioBuffer:
    """Replace every planned span with its rendered fill, in order."""
    out = buffer
    for i, (start, end) in enumerate(plan.spans):
        span = span_from_seconds(start, end, buffer.sample_rate, len(buffer))
        fill = render_fill(
            plan.fill_type, len(span), buffer, span, config,
            derive_seed(plan.seed, "fill", i),
        )
        out = replace_span(out, span, fill)
    return out
