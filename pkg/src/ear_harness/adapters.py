"""Model adapters: remote audio-chat endpoints and deterministic mocks.

Remote adapters speak a chat-completion-style wire format driven by a
per-provider request template, with token-bucket rate limiting and
exponential-backoff retries. Mock adapters simulate ideal or degenerate
respondents (always answer, always hallucinate, always refuse, ...) so
the metric pipeline can be validated offline.
"""

from __future__ import annotations

import base64
import importlib.resources
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import requests

from .corpus import Realization
from .rng import Xorshift64Star, derive_seed
from .textnorm import normalize

log = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}

MOCK_POLICIES = (
    "oracle_answerer", "hallucinator", "generic_refuser", "explicit_repairer",
    "conditional_reliable", "noisy", "composite", "width_sensitive",
)

# Plausible wrong answers for hallucinating mocks; anything colliding with
# the target is filtered out before the seeded pick.
_DECOYS = (
    "Paris", "Miami", "pizza", "Wednesday", "London", "the violin",
    "tea", "Michigan", "eleven", "a golden retriever",
)


class AdapterError(Exception):
    pass


def load_prompt(name: str) -> str:
    ref = importlib.resources.files("ear_harness") / "prompts" / f"{name}.txt"
    return ref.read_text(encoding="utf-8")


def build_prompt(strategy: str, question: str) -> str:
    if strategy == "base":
        template = load_prompt("inference_base")
    elif strategy == "transcribe_then_answer":
        template = load_prompt("inference_transcribe")
    else:
        raise AdapterError(f"unknown prompt strategy {strategy!r}")
    return template.replace("{QUESTION}", question)


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0
    max_tokens: int = 2048

    def __post_init__(self):
        if not (0.0 <= self.temperature <= 2.0):
            raise ValueError("temperature must be in [0, 2]")


@dataclass(frozen=True)
class MockPolicy:
    policy: str
    seed: int = 0
    p_correct: float = 1.0
    p_repair: float = 1.0
    # composite: delegate per answerability
    answerable_policy: str | None = None
    unanswerable_policy: str | None = None
    # width_sensitive: repair probability grows with masked seconds
    repair_rate_per_second: float = 0.0

    def __post_init__(self):
        if self.policy not in MOCK_POLICIES:
            raise ValueError(f"unknown mock policy {self.policy!r}")
        for p in (self.p_correct, self.p_repair):
            if not (0.0 <= p <= 1.0):
                raise ValueError("mock probabilities must be in [0, 1]")


@dataclass(frozen=True)
class ModelAdapter:
    model_id: str
    kind: str = "mock"  # mock | remote
    endpoint: str | None = None
    auth_env_var: str | None = None
    request_template: str | None = None  # path to a JSON body template
    response_path: tuple = ("choices", 0, "message", "content")
    decoding: DecodingParams = field(default_factory=DecodingParams)
    prompt_strategy: str = "base"
    rate_limit: float = 2.0  # requests per second
    burst: int = 1
    timeout: float = 60.0
    max_retries: int = 3
    mock_policy: MockPolicy | None = None

    def __post_init__(self):
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"unknown adapter kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote adapters need an endpoint")
        if self.kind == "mock" and self.mock_policy is None:
            raise ValueError("mock adapters need a mock_policy")


@dataclass(frozen=True)
class ModelResponse:
    instance_id: str
    model_id: str
    condition: str
    text: str
    latency: float = 0.0
    attempt_count: int = 1
    ok: bool = True
    error: str | None = None


def load_adapter_config(path) -> ModelAdapter:
    """Build an adapter from a JSON config file."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    decoding = DecodingParams(**doc.get("decoding", {}))
    mock = doc.get("mock_policy")
    return ModelAdapter(
        model_id=doc["model_id"],
        kind=doc.get("kind", "remote" if doc.get("endpoint") else "mock"),
        endpoint=doc.get("endpoint"),
        auth_env_var=doc.get("auth_env_var"),
        request_template=doc.get("request_template"),
        response_path=tuple(doc.get("response_path",
                                    ("choices", 0, "message", "content"))),
        decoding=decoding,
        prompt_strategy=doc.get("strategy", "base"),
        rate_limit=float(doc.get("rate_limit", 2.0)),
        burst=int(doc.get("burst", 1)),
        timeout=float(doc.get("timeout", 60.0)),
        max_retries=int(doc.get("max_retries", 3)),
        mock_policy=MockPolicy(**mock) if mock else None,
    )


class TokenBucket:
    """Thread-safe token bucket; acquire() blocks until a token is free."""

    def __init__(self, rate: float, burst: int = 1, clock=time.monotonic,
                 sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.burst = max(1, burst)
        self._tokens = float(self.burst)
        self._last = clock()
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()

    def acquire(self):
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.burst,
                                   self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


# ---------------------------------------------------------------------------
# Mock respondents
# ---------------------------------------------------------------------------

def _oracle_text(target: str) -> str:
    return f"The answer is {target}."


def _hallucinated_text(target: str, rng: Xorshift64Star) -> str:
    norm_target = normalize(target, drop_articles=True)
    options = [d for d in _DECOYS
               if normalize(d, drop_articles=True) not in norm_target
               and norm_target not in normalize(d, drop_articles=True)]
    return f"The answer is {options[rng.randint(len(options))]}."


_REFUSAL_TEXT = "I don't know."
_REPAIR_TEXT = (
    "Part of the audio seems to be masked by noise, so I couldn't hear the "
    "key detail. Could you repeat the missing part?"
)


def _respond(policy_name: str, policy: MockPolicy, realization: Realization,
             target: str, rng: Xorshift64Star) -> str:
    answerable = realization.answerability == 1
    if policy_name == "oracle_answerer":
        return _oracle_text(target)
    if policy_name == "hallucinator":
        return _hallucinated_text(target, rng)
    if policy_name == "generic_refuser":
        return _REFUSAL_TEXT
    if policy_name == "explicit_repairer":
        return _REPAIR_TEXT
    if policy_name == "conditional_reliable":
        return _oracle_text(target) if answerable else _REPAIR_TEXT
    if policy_name == "noisy":
        if answerable:
            correct = rng.next_float() < policy.p_correct
            return _oracle_text(target) if correct else _hallucinated_text(target, rng)
        repair = rng.next_float() < policy.p_repair
        return _REPAIR_TEXT if repair else _hallucinated_text(target, rng)
    if policy_name == "width_sensitive":
        if answerable:
            correct = rng.next_float() < policy.p_correct
            return _oracle_text(target) if correct else _hallucinated_text(target, rng)
        width = realization.mask_plan.total_width() if realization.mask_plan else 0.0
        p = min(1.0, policy.p_repair + policy.repair_rate_per_second * width)
        return _REPAIR_TEXT if rng.next_float() < p else _hallucinated_text(target, rng)
    raise AdapterError(f"unknown mock policy {policy_name!r}")


def mock_respond(policy: MockPolicy, realization: Realization, target: str,
                 instance_id: str = "", model_id: str = "mock") -> ModelResponse:
    """Deterministic simulated response for (policy, seed, realization)."""
    rng = Xorshift64Star(
        derive_seed(policy.seed, instance_id, realization.condition))
    name = policy.policy
    if name == "composite":
        name = (policy.answerable_policy if realization.answerability == 1
                else policy.unanswerable_policy)
        if name is None:
            raise AdapterError("composite policy needs both delegate policies")
    text = _respond(name, policy, realization, target, rng)
    return ModelResponse(
        instance_id=instance_id,
        model_id=model_id,
        condition=realization.condition,
        text=text.rstrip(),
    )


# ---------------------------------------------------------------------------
# Remote adapters
# ---------------------------------------------------------------------------

_DEFAULT_TEMPLATE = {
    "model": "{MODEL}",
    "temperature": "{TEMPERATURE}",
    "max_tokens": "{MAX_TOKENS}",
    "messages": [
        {
            "role": "user",
            "content": [
                {"type": "text", "text": "{PROMPT}"},
                {"type": "input_audio",
                 "input_audio": {"data": "{AUDIO_B64}", "format": "wav"}},
            ],
        }
    ],
}


def _fill_template(node, values: dict):
    """Substitute {PLACEHOLDER} strings anywhere inside a JSON template."""
    if isinstance(node, dict):
        return {k: _fill_template(v, values) for k, v in node.items()}
    if isinstance(node, list):
        return [_fill_template(v, values) for v in node]
    if isinstance(node, str):
        if node in ("{TEMPERATURE}", "{MAX_TOKENS}"):
            return values[node]  # keep numeric types numeric
        for key, val in values.items():
            if key in node:
                node = node.replace(key, str(val))
        return node
    return node


def _extract(body: dict, path: tuple) -> str:
    node = body
    for step in path:
        node = node[step]
    return str(node)


def _default_transport(url, headers, payload, timeout):
    resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    try:
        body = resp.json()
    except ValueError:
        body = {}
    return resp.status_code, body


def query_model(adapter: ModelAdapter, audio_path, question: str, *,
                realization: Realization | None = None, target: str = "",
                instance_id: str = "", bucket: TokenBucket | None = None,
                transport=None, sleep=time.sleep) -> ModelResponse:
    """Send one (audio, question) query through an adapter.

    Mock adapters answer from their policy using realization metadata.
    Remote adapters never mutate the audio file, respect the adapter's
    rate limit when a shared ``bucket`` is supplied, and retry transient
    failures with exponential backoff. A query that still fails after the
    retries is returned as a failed response, not raised, so one bad cell
    never aborts a run.
    """
    if adapter.kind == "mock":
        if realization is None:
            raise AdapterError("mock adapters need the realization metadata")
        return mock_respond(adapter.mock_policy, realization, target,
                            instance_id=instance_id, model_id=adapter.model_id)

    transport = transport or _default_transport
    prompt = build_prompt(adapter.prompt_strategy, question)
    audio_b64 = base64.b64encode(Path(audio_path).read_bytes()).decode("ascii")
    if adapter.request_template:
        template = json.loads(Path(adapter.request_template).read_text())
    else:
        template = _DEFAULT_TEMPLATE
    payload = _fill_template(template, {
        "{MODEL}": adapter.model_id,
        "{PROMPT}": prompt,
        "{AUDIO_B64}": audio_b64,
        "{TEMPERATURE}": adapter.decoding.temperature,
        "{MAX_TOKENS}": adapter.decoding.max_tokens,
    })
    headers = {}
    if adapter.auth_env_var:
        token = os.environ.get(adapter.auth_env_var)
        if not token:
            return ModelResponse(
                instance_id=instance_id, model_id=adapter.model_id,
                condition=realization.condition if realization else "",
                text="", ok=False,
                error=f"credential env var {adapter.auth_env_var} not set")
        headers["Authorization"] = f"Bearer {token}"

    start = time.monotonic()
    last_error = "no attempt made"
    attempts = 0
    for attempt in range(adapter.max_retries + 1):
        attempts = attempt + 1
        if bucket is not None:
            bucket.acquire()
        try:
            status, body = transport(adapter.endpoint, headers, payload,
                                     adapter.timeout)
        except requests.RequestException as exc:
            last_error = f"transport error: {exc}"
            status = None
        else:
            if status == 200:
                try:
                    text = _extract(body, adapter.response_path)
                except (KeyError, IndexError, TypeError):
                    last_error = "response body missing expected content path"
                    status = None
                else:
                    return ModelResponse(
                        instance_id=instance_id, model_id=adapter.model_id,
                        condition=realization.condition if realization else "",
                        text=text.rstrip(),
                        latency=time.monotonic() - start,
                        attempt_count=attempts)
            elif status in (401, 403):
                last_error = f"authentication failure (HTTP {status})"
                break
            elif status in RETRYABLE_STATUS:
                last_error = f"HTTP {status}"
            else:
                last_error = f"HTTP {status}"
                break
        if attempt < adapter.max_retries:
            sleep(min(30.0, 0.5 * 2 ** attempt))
    log.warning("model %s failed on %s/%s: %s", adapter.model_id, instance_id,
                realization.condition if realization else "?", last_error)
    return ModelResponse(
        instance_id=instance_id, model_id=adapter.model_id,
        condition=realization.condition if realization else "",
        text="", latency=time.monotonic() - start,
        attempt_count=attempts, ok=False, error=last_error)
