"""Response classification.

Answerable conditions are scored for correctness (normalized substring
match, or a remote LLM judge). Unanswerable conditions are classified
into explicit_repair / generic_refusal / other, either by a remote LLM
judge or by a deterministic rule-based classifier that serves as the
offline stand-in and regression oracle.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass

import requests

from .adapters import load_prompt
from .textnorm import normalize

log = logging.getLogger(__name__)

REPAIR_CLASSES = ("explicit_repair", "generic_refusal", "other")

CORRECTNESS_LABELS = ("CORRECT", "INCORRECT")
REPAIR_LABELS = ("EXPLICIT_REPAIR", "GENERIC_REFUSAL", "OTHER")


class JudgeError(Exception):
    pass


class JudgeUnavailableError(JudgeError):
    """Remote judge failed after retries; the verdict must be withheld."""


@dataclass(frozen=True)
class Verdict:
    instance_id: str
    model_id: str
    condition: str
    kind: str  # correctness | repair
    correctness: str | None = None  # correct | incorrect
    repair_class: str | None = None
    judge_id: str = "rule_based"

    def __post_init__(self):
        if self.kind == "correctness":
            if self.correctness not in ("correct", "incorrect") or self.repair_class:
                raise ValueError("correctness verdict must carry only a correctness value")
        elif self.kind == "repair":
            if self.repair_class not in REPAIR_CLASSES or self.correctness:
                raise ValueError("repair verdict must carry only a repair class")
        else:
            raise ValueError(f"unknown verdict kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Rule-based repair classification
# ---------------------------------------------------------------------------

_MISSING_INFO = re.compile(
    r"\b(noise|noisy|masked|missing|inaudible|cut\s*off|"
    r"(?:couldn'?t|can'?t|cannot|could\s+not|can\s*not)\s+(?:\w+\s+){0,2}hear|"
    r"unclear|garbled|muffled|obscured|drowned\s+out|blanked|bleeped|"
    r"covered\s+(?:by|up)|didn'?t\s+(?:catch|hear)|not\s+audible)\b",
    re.IGNORECASE)

_CLARIFICATION = re.compile(
    r"\?|\b(please\s+)?(repeat|clarify|rephrase|provide|restate|"
    r"say\s+(?:it|that|the\s+\w+)\s+again)\b",
    re.IGNORECASE)

_REFUSAL = re.compile(
    r"\b(don'?t\s+know|do\s+not\s+know|cannot\s+determine|can'?t\s+determine|"
    r"not\s+mentioned|(?:does\s+not|doesn'?t)\s+mention|"
    r"unable\s+to\s+(?:answer|determine)|no\s+information|"
    r"cannot\s+answer|can'?t\s+answer|not\s+identifiable|not\s+specified|"
    r"not\s+stated|not\s+provided|too\s+short\s+to\s+determine|"
    r"impossible\s+to\s+(?:say|tell|determine)|cannot\s+(?:say|tell)|"
    r"can'?t\s+(?:say|tell)|no\s+answer\s+(?:is\s+)?(?:given|available))\b",
    re.IGNORECASE)

# A refusal phrase followed by a guess anyway ("...but it's probably X")
# is an attempted answer, which demotes the response to "other".
_ATTEMPTED_ANSWER = re.compile(
    r"\b(probably|perhaps|maybe|i\s+(?:think|guess|believe)|my\s+guess|"
    r"most\s+likely|if\s+i\s+had\s+to\s+guess)\b",
    re.IGNORECASE)


def rule_based_repair_classifier(text: str) -> str:
    """Deterministic three-way classification of an unanswerable-condition
    response. Total: every string maps to exactly one class.

    explicit_repair needs both a missing-information signal and a
    clarification request; generic_refusal needs a refusal phrase with no
    attempted answer; everything else (including empty text) is other.
    """
    if not text or not text.strip():
        return "other"
    if _MISSING_INFO.search(text) and _CLARIFICATION.search(text):
        return "explicit_repair"
    if _REFUSAL.search(text) and not _ATTEMPTED_ANSWER.search(text):
        return "generic_refusal"
    return "other"


# ---------------------------------------------------------------------------
# Remote LLM judge
# ---------------------------------------------------------------------------

class JudgeClient:
    """Minimal chat client for a remote judge endpoint.

    The judge must answer with exactly one expected label token; anything
    else triggers one re-ask before the caller falls back or withholds.
    """

    def __init__(self, judge_id: str, endpoint: str, auth_token: str | None = None,
                 timeout: float = 60.0, max_retries: int = 2, transport=None,
                 sleep=time.sleep):
        self.judge_id = judge_id
        self.endpoint = endpoint
        self.auth_token = auth_token
        self.timeout = timeout
        self.max_retries = max_retries
        self._transport = transport or self._post
        self._sleep = sleep

    def _post(self, prompt: str) -> str:
        headers = {}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        resp = requests.post(
            self.endpoint, headers=headers, timeout=self.timeout,
            json={"model": self.judge_id, "temperature": 0,
                  "messages": [{"role": "user", "content": prompt}]})
        resp.raise_for_status()
        return str(resp.json()["choices"][0]["message"]["content"])

    def ask(self, prompt: str) -> str:
        last = None
        for attempt in range(self.max_retries + 1):
            try:
                return self._transport(prompt)
            except Exception as exc:  # transport failures only
                last = exc
                if attempt < self.max_retries:
                    self._sleep(min(30.0, 0.5 * 2 ** attempt))
        raise JudgeUnavailableError(f"judge endpoint failed: {last}")


def parse_label(text: str, labels) -> str | None:
    """Return the single expected label present in ``text``, else None."""
    found = {lab for lab in labels if re.search(rf"\b{lab}\b", text)}
    # EXPLICIT_REPAIR etc. never substring-collide, so set size is exact
    if len(found) == 1:
        return found.pop()
    return None


def judge_correctness(response, target: str, mode: str = "normalized_match",
                      question: str = "", client: JudgeClient | None = None) -> Verdict:
    """Correctness verdict for an answerable-condition response.

    normalized_match: correct iff the normalized target is a substring of
    the normalized response (lowercase, punctuation stripped, articles
    removed). Non-answers (clarification requests, refusals) therefore
    come out incorrect, as required under answerable conditions.
    """
    if mode == "normalized_match":
        resp_n = normalize(response.text, drop_articles=True)
        target_n = normalize(target, drop_articles=True)
        correct = bool(target_n) and target_n in resp_n
        return Verdict(
            instance_id=response.instance_id, model_id=response.model_id,
            condition=response.condition, kind="correctness",
            correctness="correct" if correct else "incorrect",
            judge_id="normalized_match")
    if mode != "llm_judge":
        raise JudgeError(f"unknown correctness mode {mode!r}")
    if client is None:
        raise JudgeError("llm_judge mode needs a JudgeClient")
    prompt = (load_prompt("judge_answerable")
              .replace("{QUESTION}", question)
              .replace("{TARGET}", target)
              .replace("{RESPONSE}", response.text))
    for _ in range(2):  # one re-ask on unparseable output
        label = parse_label(client.ask(prompt), CORRECTNESS_LABELS)
        if label:
            return Verdict(
                instance_id=response.instance_id, model_id=response.model_id,
                condition=response.condition, kind="correctness",
                correctness=label.lower(), judge_id=client.judge_id)
    raise JudgeUnavailableError("judge output unparseable after re-ask")


def judge_repair(response, question: str, mode: str = "rule_based",
                 client: JudgeClient | None = None) -> Verdict:
    """Repair-class verdict for an unanswerable-condition response."""
    if mode == "rule_based":
        return Verdict(
            instance_id=response.instance_id, model_id=response.model_id,
            condition=response.condition, kind="repair",
            repair_class=rule_based_repair_classifier(response.text),
            judge_id="rule_based")
    if mode != "llm_judge":
        raise JudgeError(f"unknown repair judge mode {mode!r}")
    if client is None:
        raise JudgeError("llm_judge mode needs a JudgeClient")
    prompt = (load_prompt("judge_unanswerable")
              .replace("{QUESTION}", question)
              .replace("{RESPONSE}", response.text))
    for _ in range(2):  # one re-ask on unparseable output
        try:
            label = parse_label(client.ask(prompt), REPAIR_LABELS)
        except JudgeUnavailableError:
            label = None
            break
        if label:
            return Verdict(
                instance_id=response.instance_id, model_id=response.model_id,
                condition=response.condition, kind="repair",
                repair_class=label.lower(), judge_id=client.judge_id)
    log.warning("LLM judge unusable for %s/%s; downgrading to rule_based",
                response.instance_id, response.model_id)
    return Verdict(
        instance_id=response.instance_id, model_id=response.model_id,
        condition=response.condition, kind="repair",
        repair_class=rule_based_repair_classifier(response.text),
        judge_id="rule_based_fallback")
