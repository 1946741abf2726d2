"""Command-line front end.

Subcommands: build, run, judge, score, report, demo, validate.
Exit codes: 0 success, 1 usage error, 2 validation failure, 3 partial run
(some cells failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus, fixtures, runner
from .audio import read_audio
from .runner import RunConfig, RunnerError, load_run_config, run_pipeline

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_PARTIAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="ear-harness",
                description="Repair-aware spoken-QA evaluation harness")
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add_run_flags(sp, need_config=True):
        sp.add_argument("--config", required=need_config,
                        help="run config JSON file")
        sp.add_argument("--run-id", help="override run_id from the config")
        sp.add_argument("--runs-root", default="runs")
        sp.add_argument("--fill-types", nargs="+",
                        help="override mask fill types")
        sp.add_argument("--seed", type=int, help="override global seed")
        sp.add_argument("--concurrency", type=int)
        sp.add_argument("--offline", action="store_true",
                        help="forbid network: mocks and rule-based judge only")

    for name, stages in (("build", ["build"]), ("run", ["run"]),
                         ("judge", ["judge"]), ("score", ["score"]),
                         ("report", ["report"])):
        sp = sub.add_parser(name, help=f"run the {name} stage")
        add_run_flags(sp)
        sp.set_defaults(stages=stages)

    sp = sub.add_parser("pipeline", help="run several stages in order")
    add_run_flags(sp)
    sp.add_argument("--stages", nargs="+", default=list(runner.STAGES))

    sp = sub.add_parser("demo", help="full offline pipeline on bundled fixtures")
    sp.add_argument("--runs-root", default="runs")
    sp.add_argument("--run-id", default="demo")
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--fill-types", nargs="+", default=["white_noise"])
    sp.add_argument("--fixtures-only", action="store_true",
                    help="materialize the fixture corpus and exit")

    sp = sub.add_parser("validate", help="validate a manifest and its alignments")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--alignments", required=True)
    return p


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if getattr(args, "run_id", None):
        config.run_id = args.run_id
    if getattr(args, "fill_types", None):
        config.fill_types = list(args.fill_types)
    if getattr(args, "seed", None) is not None:
        config.global_seed = args.seed
    if getattr(args, "concurrency", None):
        config.concurrency_bound = args.concurrency
    if getattr(args, "offline", False):
        config.offline = True
        config.judge_mode = "rule_based"
        if config.correctness_mode == "llm_judge":
            config.correctness_mode = "normalized_match"
    return config


def cmd_stages(args) -> int:
    config = _apply_overrides(load_run_config(args.config), args)
    _, failed = run_pipeline(config, stages=args.stages,
                             runs_root=args.runs_root)
    return EXIT_PARTIAL if failed else EXIT_OK


def demo_config(corpus_dir: Path, run_id: str, seed: int,
                fill_types) -> RunConfig:
    """Offline demo config: three mock respondents, rule-based judge."""
    fx = fixtures.build_fixture_corpus(corpus_dir)
    return RunConfig(
        run_id=run_id,
        manifest_path=str(fx.manifest_path),
        alignment_dir=str(fx.alignment_dir),
        mask={"asset_bank": str(fx.asset_bank)},
        fill_types=list(fill_types),
        adapters=[
            {"model_id": "mock-reliable", "kind": "mock",
             "mock_policy": {"policy": "conditional_reliable", "seed": seed}},
            {"model_id": "mock-refuser", "kind": "mock",
             "mock_policy": {"policy": "composite", "seed": seed,
                             "answerable_policy": "oracle_answerer",
                             "unanswerable_policy": "generic_refuser"}},
            {"model_id": "mock-hallucinator", "kind": "mock",
             "mock_policy": {"policy": "hallucinator", "seed": seed}},
        ],
        judge_mode="rule_based",
        correctness_mode="normalized_match",
        global_seed=seed,
        offline=True,
    )


def cmd_demo(args) -> int:
    runs_root = Path(args.runs_root)
    corpus_dir = runs_root / args.run_id / "fixtures"
    if args.fixtures_only:
        fx = fixtures.build_fixture_corpus(corpus_dir)
        print(f"fixture corpus written to {fx.root}")
        print(f"manifest: {fx.manifest_path}")
        print(f"alignments: {fx.alignment_dir}")
        return EXIT_OK
    config = demo_config(corpus_dir, args.run_id, args.seed, args.fill_types)
    run_dir, failed = run_pipeline(config, runs_root=runs_root)
    print(f"demo run complete: {run_dir}")
    print((run_dir / "report.md").read_text())
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_validate(args) -> int:
    problems = []
    try:
        instances = corpus.load_manifest(args.manifest)
    except corpus.ManifestError as exc:
        print(f"FAIL manifest: {exc}")
        return EXIT_VALIDATION
    align_dir = Path(args.alignments)
    for inst in instances:
        path = align_dir / f"{inst.instance_id}.json"
        try:
            alignment = corpus.load_alignment(path)
            duration = read_audio(inst.audio_path).duration_seconds
            report = corpus.validate_alignment(inst, alignment, duration)
        except Exception as exc:
            problems.append(f"{inst.instance_id}: {exc}")
            continue
        problems.extend(f"{inst.instance_id}: {entry}" for entry in report)
    if problems:
        for entry in problems:
            print(f"FAIL {entry}")
        return EXIT_VALIDATION
    print(f"OK {len(instances)} instances validated")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "demo":
            return cmd_demo(args)
        if args.command == "validate":
            return cmd_validate(args)
        return cmd_stages(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RunnerError, corpus.CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
