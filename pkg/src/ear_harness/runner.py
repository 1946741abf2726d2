"""Pipeline orchestration: build -> run -> judge -> score -> report.

Every stage writes append-only JSONL artifacts into one run directory,
each headed by a record carrying the schema version and the hash of the
run configuration. Stages are idempotent and resumable: a completed stage
is a no-op on re-run, and the run stage re-queries only the missing
(instance, model, condition, fill) cells.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus, judge, metrics
from .adapters import ModelAdapter, TokenBucket, load_adapter_config, query_model
from .audio import read_audio
from .corpus import EvaluationTriplet, Realization, build_triplet, load_alignment, load_manifest
from .masking import FILL_TYPES, MaskConfig, MaskPlan
from .metrics import aggregate_run, ranking_stability, report_markdown, scores_csv, scores_json

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STAGES = ("build", "run", "judge", "score", "report")


class RunnerError(Exception):
    pass


class MissingPrerequisiteError(RunnerError):
    pass


class ConfigMismatchError(RunnerError):
    pass


@dataclass
class RunConfig:
    run_id: str
    manifest_path: str
    alignment_dir: str
    mask: dict = field(default_factory=dict)  # MaskConfig fields sans fill_type
    fill_types: list = field(default_factory=lambda: ["white_noise"])
    adapters: list = field(default_factory=list)  # config paths or inline dicts
    judge_mode: str = "rule_based"
    correctness_mode: str = "normalized_match"
    concurrency_bound: int = 4
    global_seed: int = 0
    offline: bool = False

    def __post_init__(self):
        if self.concurrency_bound < 1:
            raise ValueError("concurrency_bound must be >= 1")
        for fill in self.fill_types:
            if fill not in FILL_TYPES:
                raise ValueError(f"unknown fill type {fill!r}")

    def mask_config(self, fill_type: str) -> MaskConfig:
        return MaskConfig(fill_type=fill_type, **self.mask)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "manifest_path": str(self.manifest_path),
            "alignment_dir": str(self.alignment_dir),
            "mask": dict(self.mask),
            "fill_types": list(self.fill_types),
            "adapters": [a if isinstance(a, dict) else str(a) for a in self.adapters],
            "judge_mode": self.judge_mode,
            "correctness_mode": self.correctness_mode,
            "concurrency_bound": self.concurrency_bound,
            "global_seed": self.global_seed,
            "offline": self.offline,
        }

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def load_run_config(path) -> RunConfig:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunConfig(**doc)


def resolve_adapters(config: RunConfig) -> list[ModelAdapter]:
    adapters = []
    for entry in config.adapters:
        if isinstance(entry, dict):
            tmp = entry
            adapter = _adapter_from_dict(tmp)
        else:
            adapter = load_adapter_config(entry)
        if config.offline and adapter.kind == "remote":
            raise RunnerError(
                f"adapter {adapter.model_id!r} is remote but the run is offline")
        adapters.append(adapter)
    if len({a.model_id for a in adapters}) != len(adapters):
        raise RunnerError("duplicate model_id among adapters")
    return adapters


def _adapter_from_dict(doc: dict) -> ModelAdapter:
    from .adapters import DecodingParams, MockPolicy
    mock = doc.get("mock_policy")
    return ModelAdapter(
        model_id=doc["model_id"],
        kind=doc.get("kind", "remote" if doc.get("endpoint") else "mock"),
        endpoint=doc.get("endpoint"),
        auth_env_var=doc.get("auth_env_var"),
        request_template=doc.get("request_template"),
        decoding=DecodingParams(**doc.get("decoding", {})),
        prompt_strategy=doc.get("strategy", "base"),
        rate_limit=float(doc.get("rate_limit", 2.0)),
        burst=int(doc.get("burst", 1)),
        timeout=float(doc.get("timeout", 60.0)),
        max_retries=int(doc.get("max_retries", 3)),
        mock_policy=MockPolicy(**mock) if mock else None,
    )


# ---------------------------------------------------------------------------
# Artifact I/O
# ---------------------------------------------------------------------------

def _header(artifact: str, config: RunConfig) -> dict:
    return {"kind": "header", "schema": SCHEMA_VERSION, "artifact": artifact,
            "config_hash": config.config_hash(), "seed": config.global_seed}


def read_artifact(path, config: RunConfig | None = None) -> list[dict]:
    """Read a JSONL artifact, checking the header hash when config given."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            rec = json.loads(line)
            if i == 0:
                if rec.get("kind") != "header":
                    raise RunnerError(f"{path}: missing artifact header")
                if config is not None and rec["config_hash"] != config.config_hash():
                    raise ConfigMismatchError(
                        f"{path}: written under config {rec['config_hash']}, "
                        f"current config is {config.config_hash()}; refusing to mix")
                continue
            rows.append(rec)
    return rows


class ArtifactWriter:
    """Append-only JSONL writer, thread-safe, flushed per record."""

    def __init__(self, path, artifact: str, config: RunConfig):
        self.path = Path(path)
        self._lock = threading.Lock()
        new = not self.path.exists()
        self._fh = open(self.path, "a", encoding="utf-8")
        if new:
            self.append(_header(artifact, config))

    def append(self, rec: dict):
        with self._lock:
            self._fh.write(json.dumps(rec, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self):
        self._fh.close()


def _stage_manifest_path(run_dir: Path, stage: str) -> Path:
    return run_dir / f"stage_{stage}.json"


def _stage_done(run_dir: Path, stage: str, config: RunConfig) -> bool:
    p = _stage_manifest_path(run_dir, stage)
    if not p.exists():
        return False
    doc = json.loads(p.read_text())
    if doc["config_hash"] != config.config_hash():
        raise ConfigMismatchError(
            f"stage {stage} of run {config.run_id!r} was completed under a "
            f"different config ({doc['config_hash']}); refusing to mix")
    return True


def _mark_stage_done(run_dir: Path, stage: str, config: RunConfig, **extra):
    doc = {"stage": stage, "config_hash": config.config_hash(),
           "seed": config.global_seed, **extra}
    _stage_manifest_path(run_dir, stage).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Serialization helpers
# ---------------------------------------------------------------------------

def plan_to_dict(plan: MaskPlan | None):
    if plan is None:
        return None
    return {
        "condition": plan.condition,
        "spans": [[round(s, 6), round(e, 6)] for s, e in plan.spans],
        "fill_type": plan.fill_type,
        "seed": plan.seed,
        "masked_tokens": list(plan.masked_tokens),
    }


def plan_from_dict(doc) -> MaskPlan | None:
    if doc is None:
        return None
    return MaskPlan(
        condition=doc["condition"],
        spans=tuple((float(s), float(e)) for s, e in doc["spans"]),
        fill_type=doc["fill_type"],
        seed=int(doc["seed"]),
        masked_tokens=tuple(doc["masked_tokens"]),
    )


def realization_to_dict(r: Realization) -> dict:
    return {"condition": r.condition, "answerability": r.answerability,
            "audio_path": r.audio_path, "mask_plan": plan_to_dict(r.mask_plan)}


def realization_from_dict(doc) -> Realization:
    return Realization(
        condition=doc["condition"], answerability=int(doc["answerability"]),
        audio_path=doc["audio_path"], mask_plan=plan_from_dict(doc["mask_plan"]))


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_build(config: RunConfig, run_dir: Path) -> None:
    if _stage_done(run_dir, "build", config):
        return
    instances = load_manifest(config.manifest_path)
    align_dir = Path(config.alignment_dir)
    path = run_dir / "triplets.jsonl"
    if path.exists():
        path.unlink()  # deterministic rebuild of a partial build
    writer = ArtifactWriter(path, "triplets", config)
    try:
        for fill in config.fill_types:
            mask_cfg = config.mask_config(fill)
            for inst in instances:
                alignment = load_alignment(align_dir / f"{inst.instance_id}.json")
                triplet = build_triplet(inst, alignment, mask_cfg,
                                        config.global_seed, run_dir)
                writer.append({
                    "instance_id": inst.instance_id,
                    "dataset_tag": inst.dataset_tag,
                    "question": inst.question,
                    "answer": inst.answer,
                    "fill_type": fill,
                    "realizations": [realization_to_dict(r)
                                     for r in triplet.realizations()],
                })
    finally:
        writer.close()
    _mark_stage_done(run_dir, "build", config,
                     n_instances=len(instances), fill_types=config.fill_types)


def _response_key(rec) -> tuple:
    return (rec["instance_id"], rec["model_id"], rec["condition"], rec["fill_type"])


def stage_run(config: RunConfig, run_dir: Path) -> int:
    """Query every (instance, condition, fill) cell on every adapter.

    Returns the number of cells that ultimately failed (transport-level).
    """
    triplets_path = run_dir / "triplets.jsonl"
    if not triplets_path.exists():
        raise MissingPrerequisiteError("run stage needs triplets.jsonl; run build first")
    triplets = read_artifact(triplets_path, config)
    adapters = resolve_adapters(config)
    responses_path = run_dir / "responses.jsonl"
    done: set = set()
    failed_before = 0
    if responses_path.exists():
        for rec in read_artifact(responses_path, config):
            if rec["ok"]:
                done.add(_response_key(rec))
    writer = ArtifactWriter(responses_path, "responses", config)
    buckets = {a.model_id: TokenBucket(a.rate_limit, a.burst) for a in adapters}
    failures = [0]
    flock = threading.Lock()

    def work(adapter, trip, realization):
        resp = query_model(
            adapter, realization.audio_path, trip["question"],
            realization=realization, target=trip["answer"],
            instance_id=trip["instance_id"], bucket=buckets[adapter.model_id])
        writer.append({
            "instance_id": resp.instance_id, "model_id": resp.model_id,
            "condition": resp.condition, "fill_type": trip["fill_type"],
            "dataset_tag": trip["dataset_tag"], "question": trip["question"],
            "answer": trip["answer"], "text": resp.text,
            "latency": resp.latency, "attempt_count": resp.attempt_count,
            "ok": resp.ok, "error": resp.error})
        if not resp.ok:
            with flock:
                failures[0] += 1

    tasks = []
    for trip in triplets:
        for rdoc in trip["realizations"]:
            realization = realization_from_dict(rdoc)
            for adapter in adapters:
                key = (trip["instance_id"], adapter.model_id,
                       realization.condition, trip["fill_type"])
                if key not in done:
                    tasks.append((adapter, trip, realization))
    if _stage_done(run_dir, "run", config) and not tasks:
        writer.close()
        return 0
    try:
        with ThreadPoolExecutor(max_workers=config.concurrency_bound) as pool:
            list(pool.map(lambda args: work(*args), tasks))
    finally:
        writer.close()
    _mark_stage_done(run_dir, "run", config, n_cells=len(tasks),
                     n_failed=failures[0])
    return failures[0]


def stage_judge(config: RunConfig, run_dir: Path,
                judge_client=None) -> None:
    responses_path = run_dir / "responses.jsonl"
    if not responses_path.exists():
        raise MissingPrerequisiteError(
            "judge stage needs responses.jsonl; run the run stage first")
    if _stage_done(run_dir, "judge", config):
        return
    responses = read_artifact(responses_path, config)
    verdicts_path = run_dir / "verdicts.jsonl"
    if verdicts_path.exists():
        verdicts_path.unlink()
    writer = ArtifactWriter(verdicts_path, "verdicts", config)

    from .adapters import ModelResponse

    def one(rec):
        base = {
            "instance_id": rec["instance_id"], "model_id": rec["model_id"],
            "condition": rec["condition"], "fill_type": rec["fill_type"],
            "dataset_tag": rec["dataset_tag"],
        }
        if not rec["ok"]:
            # transport failures never reach scoring
            return {**base, "kind": "correctness"
                    if rec["condition"] != "degrading_masked" else "repair",
                    "correctness": None, "repair_class": None,
                    "judge_id": None, "status": "excluded",
                    "exclusion_reason": rec["error"]}
        resp = ModelResponse(
            instance_id=rec["instance_id"], model_id=rec["model_id"],
            condition=rec["condition"], text=rec["text"])
        if rec["condition"] == "degrading_masked":
            v = judge.judge_repair(resp, rec["question"],
                                   mode=config.judge_mode, client=judge_client)
            return {**base, "kind": "repair", "correctness": None,
                    "repair_class": v.repair_class, "judge_id": v.judge_id,
                    "status": "ok"}
        try:
            v = judge.judge_correctness(resp, rec["answer"],
                                        mode=config.correctness_mode,
                                        question=rec["question"],
                                        client=judge_client)
        except judge.JudgeUnavailableError as exc:
            log.warning("verdict withheld for %s/%s: %s",
                        rec["instance_id"], rec["model_id"], exc)
            return {**base, "kind": "correctness", "correctness": None,
                    "repair_class": None, "judge_id": None,
                    "status": "excluded", "exclusion_reason": str(exc)}
        return {**base, "kind": "correctness", "correctness": v.correctness,
                "repair_class": None, "judge_id": v.judge_id, "status": "ok"}

    try:
        with ThreadPoolExecutor(max_workers=config.concurrency_bound) as pool:
            for row in pool.map(one, responses):
                writer.append(row)
    finally:
        writer.close()
    _mark_stage_done(run_dir, "judge", config, n_verdicts=len(responses))


def stage_score(config: RunConfig, run_dir: Path) -> list:
    verdicts_path = run_dir / "verdicts.jsonl"
    if not verdicts_path.exists():
        raise MissingPrerequisiteError(
            "score stage needs verdicts.jsonl; run the judge stage first")
    verdicts = read_artifact(verdicts_path, config)
    reports = aggregate_run(verdicts)
    (run_dir / "scores.json").write_text(scores_json(reports), encoding="utf-8")
    (run_dir / "scores.csv").write_text(scores_csv(reports), encoding="utf-8")
    _mark_stage_done(run_dir, "score", config, n_reports=len(reports))
    return reports


def stage_report(config: RunConfig, run_dir: Path) -> str:
    scores_path = run_dir / "scores.json"
    if not scores_path.exists():
        raise MissingPrerequisiteError(
            "report stage needs scores.json; run the score stage first")
    verdicts = read_artifact(run_dir / "verdicts.jsonl", config)
    reports = aggregate_run(verdicts)
    taus = None
    fills = sorted({r.fill_type for r in reports})
    if len(fills) >= 2:
        by_fill = {}
        for f in fills:
            by_fill[f] = {r.model_id: (r.EAR if r.EAR is not None else 0.0)
                          for r in reports if r.fill_type == f}
        if len({frozenset(v) for v in by_fill.values()}) == 1:
            taus = ranking_stability(by_fill)
    text = report_markdown(reports, taus)
    (run_dir / "report.md").write_text(text, encoding="utf-8")
    _mark_stage_done(run_dir, "report", config)
    return text


def run_pipeline(config: RunConfig, stages=STAGES, runs_root="runs",
                 judge_client=None) -> tuple[Path, int]:
    """Execute the requested stages; returns (run_dir, n_failed_cells)."""
    bad = [s for s in stages if s not in STAGES]
    if bad:
        raise RunnerError(f"unknown stages: {bad}")
    stages = [s for s in STAGES if s in stages]  # canonical order
    run_dir = Path(runs_root) / config.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg_file = run_dir / "config.json"
    if cfg_file.exists():
        prev = json.loads(cfg_file.read_text())
        if prev != config.to_dict():
            raise ConfigMismatchError(
                f"run {config.run_id!r} already exists with a different config")
    else:
        cfg_file.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True)
                            + "\n")
    failed = 0
    for stage in stages:
        if stage == "build":
            stage_build(config, run_dir)
        elif stage == "run":
            failed = stage_run(config, run_dir)
        elif stage == "judge":
            stage_judge(config, run_dir, judge_client=judge_client)
        elif stage == "score":
            stage_score(config, run_dir)
        elif stage == "report":
            stage_report(config, run_dir)
    return run_dir, failed
