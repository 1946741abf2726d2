import json
import random

import numpy as np
import pytest

from ear_harness.judge import Verdict
from ear_harness.metrics import (
    MetricsError,
    UndefinedScoreError,
    aggregate_run,
    bootstrap_ci,
    competence,
    ear,
    ranking_stability,
    repair_score,
    report_markdown,
    scores_csv,
    scores_json,
)


def _cv(correct, i="i1", m="m1", cond="original"):
    return Verdict(i, m, cond, "correctness",
                   correctness="correct" if correct else "incorrect")


class TestCompetence:
    def test_pooled_average(self):
        # instance A both correct, instance B one of two correct
        vs = [_cv(True, "A"), _cv(True, "A", cond="invariant_masked"),
              _cv(True, "B"), _cv(False, "B", cond="invariant_masked")]
        assert competence(vs) == pytest.approx(75.0)

    def test_all_correct(self):
        assert competence([_cv(True), _cv(True)]) == 100.0

    def test_all_incorrect(self):
        assert competence([_cv(False), _cv(False)]) == 0.0

    def test_empty_set_undefined(self):
        with pytest.raises(UndefinedScoreError):
            competence([])

    def test_rejects_repair_verdicts(self):
        v = Verdict("i", "m", "degrading_masked", "repair", repair_class="other")
        with pytest.raises(MetricsError):
            competence([v])


class TestRepairScore:
    def test_rubric(self):
        assert repair_score("explicit_repair") == 1.0
        assert repair_score("generic_refusal") == 0.5
        assert repair_score("other") == 0.0

    def test_unknown_class(self):
        with pytest.raises(MetricsError):
            repair_score("snark")


class TestEar:
    def test_published_pairs(self):
        assert round(ear(91.5, 25.4), 1) == pytest.approx(39.8)
        assert round(ear(99.5, 63.0), 1) == pytest.approx(77.2)

    def test_degenerate_zero(self):
        assert ear(0.0, 0.0) == 0.0

    def test_equal_inputs_fixed_point(self):
        for c in (0.0, 12.5, 50.0, 99.9, 100.0):
            assert ear(c, c) == pytest.approx(c)

    def test_range_check(self):
        with pytest.raises(MetricsError):
            ear(-1.0, 50.0)
        with pytest.raises(MetricsError):
            ear(50.0, 101.0)

    def test_grid_properties(self):
        grid = np.linspace(0.0, 100.0, 101)
        for c in grid:
            for r in grid:
                e = ear(c, r)
                assert e == pytest.approx(ear(r, c))  # symmetry
                assert e <= 2.0 * min(c, r) + 1e-9  # non-compensatory
        for c in grid:
            assert ear(c, 0.0) == 0.0

    def test_monotonicity(self):
        grid = np.linspace(0.0, 100.0, 101)
        for r in (0.0, 10.0, 55.0, 100.0):
            vals = [ear(c, r) for c in grid]
            assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def _rec(model, kind, value, i="i1", dataset="d", fill="white_noise",
         status="ok"):
    rec = {"instance_id": i, "model_id": model, "dataset_tag": dataset,
           "fill_type": fill, "kind": kind, "status": status,
           "correctness": None, "repair_class": None}
    if kind == "correctness":
        rec["correctness"] = value
    else:
        rec["repair_class"] = value
    return rec


class TestAggregateRun:
    def _records(self):
        recs = []
        for i in range(4):
            recs.append(_rec("m1", "correctness", "correct", i=f"i{i}"))
            recs.append(_rec("m1", "repair", "generic_refusal", i=f"i{i}"))
        return recs

    def test_basic_grouping(self):
        reports = aggregate_run(self._records())
        assert len(reports) == 1
        rep = reports[0]
        assert rep.C == 100.0
        assert rep.R == 50.0
        assert rep.EAR == pytest.approx(ear(100.0, 50.0))
        assert rep.repair_class_histogram["generic_refusal"] == 4

    def test_order_independence(self):
        recs = self._records()
        base = aggregate_run(recs)
        for seed in range(50):
            shuffled = recs[:]
            random.Random(seed).shuffle(shuffled)
            assert aggregate_run(shuffled) == base

    def test_excluded_records_omitted(self):
        recs = self._records()
        recs.append(_rec("m1", "correctness", None, i="i9", status="excluded"))
        rep = aggregate_run(recs)[0]
        assert rep.C == 100.0
        assert rep.excluded == 1
        assert rep.n_answerable == 4

    def test_incomplete_group_flagged(self):
        recs = [_rec("m1", "correctness", "correct")]
        rep = aggregate_run(recs)[0]
        assert rep.incomplete and rep.EAR is None

    def test_zero_repair_zero_ear(self):
        recs = [_rec("m1", "correctness", "correct"),
                _rec("m1", "repair", "other")]
        rep = aggregate_run(recs)[0]
        assert rep.R == 0.0 and rep.EAR == 0.0


class TestRankingStability:
    def test_identical_tables(self):
        table = {"m1": 10.0, "m2": 20.0, "m3": 30.0}
        taus = ranking_stability({"silence": table, "music": dict(table)})
        assert taus[("music", "silence")] == pytest.approx(1.0)

    def test_reversed_ranking(self):
        a = {"m1": 10.0, "m2": 20.0, "m3": 30.0}
        b = {"m1": 30.0, "m2": 20.0, "m3": 10.0}
        taus = ranking_stability({"silence": a, "music": b})
        assert taus[("music", "silence")] == pytest.approx(-1.0)

    def test_one_swap_over_four_models(self):
        # rankings (1,2,3,4) vs (1,3,2,4): 5 concordant, 1 discordant pair
        a = {"m1": 1.0, "m2": 2.0, "m3": 3.0, "m4": 4.0}
        b = {"m1": 1.0, "m2": 3.0, "m3": 2.0, "m4": 4.0}
        taus = ranking_stability({"f1": a, "f2": b})
        assert taus[("f1", "f2")] == pytest.approx(2.0 / 3.0)

    def test_mismatched_model_sets(self):
        with pytest.raises(MetricsError):
            ranking_stability({"f1": {"m1": 1.0}, "f2": {"m2": 1.0}})


class TestEmission:
    def test_scores_json_rounds_to_one_decimal(self):
        recs = [_rec("m1", "correctness", "correct"),
                _rec("m1", "correctness", "correct", i="i2"),
                _rec("m1", "correctness", "incorrect", i="i3"),
                _rec("m1", "repair", "explicit_repair")]
        doc = json.loads(scores_json(aggregate_run(recs)))
        assert doc[0]["C"] == 66.7
        assert doc[0]["EAR"] == round(ear(200 / 3, 100.0), 1)

    def test_csv_and_markdown_shapes(self):
        recs = [_rec("m1", "correctness", "correct"),
                _rec("m1", "repair", "explicit_repair")]
        reports = aggregate_run(recs)
        csv_text = scores_csv(reports)
        assert csv_text.splitlines()[0].startswith("model_id,")
        md = report_markdown(reports)
        assert "| m1 |" in md


def test_bootstrap_ci_contains_point_estimate():
    recs = []
    rng = random.Random(0)
    for i in range(30):
        recs.append(_rec("m1", "correctness",
                         "correct" if rng.random() < 0.8 else "incorrect",
                         i=f"i{i}"))
        recs.append(_rec("m1", "repair",
                         "explicit_repair" if rng.random() < 0.5 else "other",
                         i=f"i{i}"))
    rep = aggregate_run(recs)[0]
    ci = bootstrap_ci(recs, n_replicates=200, seed=1)
    assert ci["C"][0] <= rep.C <= ci["C"][1]
    assert ci["EAR"][0] <= rep.EAR <= ci["EAR"][1]
    assert bootstrap_ci(recs, n_replicates=200, seed=1) == ci
