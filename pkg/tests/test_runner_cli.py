import json

import pytest

from ear_harness.cli import main
from ear_harness.runner import (
    ConfigMismatchError,
    MissingPrerequisiteError,
    RunConfig,
    read_artifact,
    run_pipeline,
)


def _config(fixture_corpus, run_id="t1", **kw):
    defaults = dict(
        run_id=run_id,
        manifest_path=str(fixture_corpus.manifest_path),
        alignment_dir=str(fixture_corpus.alignment_dir),
        mask={"asset_bank": str(fixture_corpus.asset_bank)},
        fill_types=["white_noise"],
        adapters=[
            {"model_id": "reliable", "kind": "mock",
             "mock_policy": {"policy": "conditional_reliable", "seed": 1}},
        ],
        global_seed=7,
        offline=True,
    )
    defaults.update(kw)
    return RunConfig(**defaults)


class TestPipeline:
    def test_full_pipeline_artifacts(self, fixture_corpus, tmp_path):
        config = _config(fixture_corpus)
        run_dir, failed = run_pipeline(config, runs_root=tmp_path)
        assert failed == 0
        for name in ("triplets.jsonl", "responses.jsonl", "verdicts.jsonl",
                     "scores.json", "scores.csv", "report.md"):
            assert (run_dir / name).exists(), name
        scores = json.loads((run_dir / "scores.json").read_text())
        assert scores[0]["C"] == 100.0
        assert scores[0]["R"] == 100.0
        assert scores[0]["EAR"] == 100.0

    def test_rescoring_is_byte_identical(self, fixture_corpus, tmp_path):
        config = _config(fixture_corpus)
        run_dir, _ = run_pipeline(config, runs_root=tmp_path)
        before = (run_dir / "scores.json").read_bytes()
        run_pipeline(config, stages=["score", "report"], runs_root=tmp_path)
        assert (run_dir / "scores.json").read_bytes() == before

    def test_judge_before_run_fails(self, fixture_corpus, tmp_path):
        config = _config(fixture_corpus, run_id="t2")
        run_pipeline(config, stages=["build"], runs_root=tmp_path)
        with pytest.raises(MissingPrerequisiteError, match="responses.jsonl"):
            run_pipeline(config, stages=["judge"], runs_root=tmp_path)

    def test_config_mismatch_refused(self, fixture_corpus, tmp_path):
        run_pipeline(_config(fixture_corpus, run_id="t3"),
                     stages=["build"], runs_root=tmp_path)
        changed = _config(fixture_corpus, run_id="t3", global_seed=8)
        with pytest.raises(ConfigMismatchError):
            run_pipeline(changed, stages=["build"], runs_root=tmp_path)

    def test_resume_queries_only_missing_cells(self, fixture_corpus, tmp_path):
        config = _config(fixture_corpus, run_id="t4")
        run_dir, _ = run_pipeline(config, stages=["build", "run"],
                                  runs_root=tmp_path)
        responses = run_dir / "responses.jsonl"
        rows = read_artifact(responses, config)
        n_before = len(rows)
        # drop the last two responses to simulate a crash mid-run
        lines = responses.read_text().splitlines()
        responses.write_text("\n".join(lines[:-2]) + "\n")
        (run_dir / "stage_run.json").unlink()
        run_pipeline(config, stages=["run"], runs_root=tmp_path)
        rows_after = read_artifact(responses, config)
        assert len(rows_after) == n_before
        keys = {(r["instance_id"], r["condition"]) for r in rows_after}
        assert len(keys) == n_before  # only the missing cells were re-queried

    def test_artifact_headers_share_config_hash(self, fixture_corpus, tmp_path):
        config = _config(fixture_corpus, run_id="t5")
        run_dir, _ = run_pipeline(config, runs_root=tmp_path)
        hashes = set()
        for name in ("triplets.jsonl", "responses.jsonl", "verdicts.jsonl"):
            header = json.loads((run_dir / name).read_text().splitlines()[0])
            assert header["kind"] == "header"
            hashes.add(header["config_hash"])
        assert hashes == {config.config_hash()}

    def test_sensitivity_run_reuses_spans_across_fills(self, fixture_corpus,
                                                       tmp_path):
        config = _config(fixture_corpus, run_id="t6",
                         fill_types=["silence", "white_noise", "music",
                                     "multi_speaker"])
        run_dir, _ = run_pipeline(config, stages=["build"], runs_root=tmp_path)
        triplets = read_artifact(run_dir / "triplets.jsonl", config)
        spans_by_fill = {}
        for trip in triplets:
            deg = next(r for r in trip["realizations"]
                       if r["condition"] == "degrading_masked")
            spans_by_fill.setdefault(trip["fill_type"], {})[
                trip["instance_id"]] = deg["mask_plan"]["spans"]
        vals = list(spans_by_fill.values())
        assert all(v == vals[0] for v in vals[1:])

    def test_offline_forbids_remote_adapters(self, fixture_corpus, tmp_path):
        config = _config(
            fixture_corpus, run_id="t7",
            adapters=[{"model_id": "r", "kind": "remote",
                       "endpoint": "http://x"}])
        with pytest.raises(Exception, match="offline"):
            run_pipeline(config, runs_root=tmp_path)


class TestCli:
    def test_usage_error_exit_code(self, capsys):
        assert main(["frobnicate"]) == 1
        assert main(["build"]) == 1  # missing --config

    def test_demo_end_to_end(self, tmp_path, capsys):
        code = main(["demo", "--runs-root", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "mock-reliable" in out
        assert (tmp_path / "demo" / "scores.json").exists()

    def test_validate_ok(self, fixture_corpus, capsys):
        code = main(["validate",
                     "--manifest", str(fixture_corpus.manifest_path),
                     "--alignments", str(fixture_corpus.alignment_dir)])
        assert code == 0
        assert "OK" in capsys.readouterr().out

    def test_validate_failure_exit_code(self, fixture_corpus, tmp_path,
                                        capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(json.dumps({
            "id": "fx000", "audio": "missing.wav", "question": "q",
            "answer": "a", "dataset": "d"}) + "\n")
        code = main(["validate", "--manifest", str(bad),
                     "--alignments", str(fixture_corpus.alignment_dir)])
        assert code == 2

    def test_stage_command_with_config_file(self, fixture_corpus, tmp_path,
                                            capsys):
        config = _config(fixture_corpus, run_id="cli1")
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(config.to_dict()))
        code = main(["build", "--config", str(cfg_path),
                     "--runs-root", str(tmp_path / "runs")])
        assert code == 0
        assert (tmp_path / "runs" / "cli1" / "triplets.jsonl").exists()
