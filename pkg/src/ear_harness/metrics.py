"""Dataset-level scoring: task competence C, repair score R, and EAR.

C is the percentage of correct answers pooled over all answerable
realizations (original plus invariant-masked). R is 100 times the mean of
the graded repair rubric (explicit repair 1.0, generic refusal 0.5,
other 0.0) over unanswerable realizations. EAR is their harmonic mean,
so it is high only when both answering and repair succeed.

Scores are carried as percentages in full precision; rounding (banker's,
one decimal) happens only at report emission.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

REPAIR_SCORE_RUBRIC = {"explicit_repair": 1.0, "generic_refusal": 0.5, "other": 0.0}


class MetricsError(Exception):
    pass


class UndefinedScoreError(MetricsError):
    """Score requested over an empty verdict set."""


@dataclass(frozen=True)
class ScoreReport:
    model_id: str
    dataset_tag: str
    fill_type: str
    C: float | None
    R: float | None
    EAR: float | None
    n_answerable: int
    n_unanswerable: int
    excluded: int
    repair_class_histogram: dict
    incomplete: bool = False


def competence(verdicts) -> float:
    """C = 100 * correct / total over correctness verdicts."""
    verdicts = list(verdicts)
    if not verdicts:
        raise UndefinedScoreError("no correctness verdicts")
    for v in verdicts:
        if v.kind != "correctness":
            raise MetricsError("competence expects correctness verdicts only")
    correct = sum(1 for v in verdicts if v.correctness == "correct")
    return 100.0 * correct / len(verdicts)


def repair_score(repair_class: str) -> float:
    try:
        return REPAIR_SCORE_RUBRIC[repair_class]
    except KeyError:
        raise MetricsError(f"unknown repair class {repair_class!r}") from None


def ear(c: float, r: float) -> float:
    """Harmonic mean of C and R (percent); 0 by convention when C+R=0."""
    if not (0.0 <= c <= 100.0 and 0.0 <= r <= 100.0):
        raise MetricsError("C and R must be percentages in [0, 100]")
    if c + r == 0.0:
        return 0.0
    return 2.0 * c * r / (c + r)


def aggregate_run(records) -> list:
    """Aggregate verdict records into one ScoreReport per
    (model_id, dataset_tag, fill_type) group.

    Records are dicts as persisted in verdicts.jsonl: keys model_id,
    dataset_tag, fill_type, kind, correctness / repair_class, and an
    optional status ("ok" | "excluded"). Excluded records count toward
    the ``excluded`` tally and nothing else. Aggregation is
    order-independent.
    """
    groups: dict[tuple, list] = {}
    for rec in records:
        key = (rec["model_id"], rec["dataset_tag"], rec["fill_type"])
        groups.setdefault(key, []).append(rec)

    reports = []
    for key in sorted(groups):
        model_id, dataset_tag, fill_type = key
        rows = groups[key]
        excluded = sum(1 for r in rows if r.get("status") == "excluded")
        answerable = [r for r in rows
                      if r["kind"] == "correctness" and r.get("status") != "excluded"]
        unanswerable = [r for r in rows
                        if r["kind"] == "repair" and r.get("status") != "excluded"]
        hist = Counter(r["repair_class"] for r in unanswerable)
        c = r_val = e_val = None
        incomplete = not answerable or not unanswerable
        if answerable:
            c = 100.0 * sum(1 for r in answerable
                            if r["correctness"] == "correct") / len(answerable)
        if unanswerable:
            r_val = 100.0 * float(np.mean(
                [repair_score(r["repair_class"]) for r in unanswerable]))
        if not incomplete:
            e_val = ear(c, r_val)
        reports.append(ScoreReport(
            model_id=model_id, dataset_tag=dataset_tag, fill_type=fill_type,
            C=c, R=r_val, EAR=e_val,
            n_answerable=len(answerable), n_unanswerable=len(unanswerable),
            excluded=excluded,
            repair_class_histogram={k: hist.get(k, 0) for k in REPAIR_SCORE_RUBRIC},
            incomplete=incomplete))
    return reports


def ranking_stability(ear_by_fill: dict) -> dict:
    """Kendall tau-b between model rankings for every fill-type pair.

    ``ear_by_fill`` maps fill_type -> {model_id: EAR}. All fill types must
    cover the same model set.
    """
    fills = sorted(ear_by_fill)
    if len(fills) < 2:
        raise MetricsError("ranking stability needs at least two fill types")
    model_sets = {f: frozenset(ear_by_fill[f]) for f in fills}
    if len(set(model_sets.values())) != 1:
        raise MetricsError("fill types cover different model sets")
    models = sorted(ear_by_fill[fills[0]])
    taus = {}
    for i, f1 in enumerate(fills):
        for f2 in fills[i + 1:]:
            a = [ear_by_fill[f1][m] for m in models]
            b = [ear_by_fill[f2][m] for m in models]
            tau = stats.kendalltau(a, b, variant="b").statistic
            taus[(f1, f2)] = float(tau)
    return taus


def bootstrap_ci(records, n_replicates: int = 1000, seed: int = 0,
                 alpha: float = 0.05) -> dict:
    """Seeded instance-level bootstrap CIs for C, R, EAR of one group.

    Harness-added rigor on top of the point estimates; resamples whole
    instances so the answerable/unanswerable pairing is preserved.
    """
    by_instance: dict[str, list] = {}
    for rec in records:
        if rec.get("status") == "excluded":
            continue
        by_instance.setdefault(rec["instance_id"], []).append(rec)
    ids = sorted(by_instance)
    if not ids:
        raise UndefinedScoreError("no instances to bootstrap")
    rng = np.random.default_rng(seed)
    samples = {"C": [], "R": [], "EAR": []}
    for _ in range(n_replicates):
        picked = rng.integers(0, len(ids), size=len(ids))
        ans, una = [], []
        for k in picked:
            for rec in by_instance[ids[k]]:
                (ans if rec["kind"] == "correctness" else una).append(rec)
        if not ans or not una:
            continue
        c = 100.0 * sum(1 for r in ans if r["correctness"] == "correct") / len(ans)
        r_val = 100.0 * float(np.mean([repair_score(r["repair_class"]) for r in una]))
        samples["C"].append(c)
        samples["R"].append(r_val)
        samples["EAR"].append(ear(c, r_val))
    out = {}
    for k, vals in samples.items():
        lo, hi = np.percentile(vals, [100 * alpha / 2, 100 * (1 - alpha / 2)])
        out[k] = (float(lo), float(hi))
    return out


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _round1(v):
    return None if v is None else round(v, 1)


def report_to_dict(rep: ScoreReport) -> dict:
    return {
        "model_id": rep.model_id,
        "dataset_tag": rep.dataset_tag,
        "fill_type": rep.fill_type,
        "C": _round1(rep.C),
        "R": _round1(rep.R),
        "EAR": _round1(rep.EAR),
        "n_answerable": rep.n_answerable,
        "n_unanswerable": rep.n_unanswerable,
        "excluded": rep.excluded,
        "repair_class_histogram": rep.repair_class_histogram,
        "incomplete": rep.incomplete,
    }


def scores_json(reports) -> str:
    return json.dumps([report_to_dict(r) for r in reports], indent=2) + "\n"


def scores_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model_id", "dataset_tag", "fill_type", "C", "R", "EAR",
                     "n_answerable", "n_unanswerable", "excluded", "incomplete"])
    for rep in reports:
        writer.writerow([
            rep.model_id, rep.dataset_tag, rep.fill_type,
            _round1(rep.C), _round1(rep.R), _round1(rep.EAR),
            rep.n_answerable, rep.n_unanswerable, rep.excluded, rep.incomplete])
    return buf.getvalue()


def _fmt(v):
    return "-" if v is None else f"{round(v, 1):.1f}"


def report_markdown(reports, taus: dict | None = None) -> str:
    """Markdown report: per-dataset C/R/EAR table plus a per-fill-type
    breakdown and, when available, the ranking-stability matrix."""
    lines = ["# Score report", ""]
    datasets = sorted({r.dataset_tag for r in reports})
    fills = sorted({r.fill_type for r in reports})
    models = sorted({r.model_id for r in reports})
    index = {(r.model_id, r.dataset_tag, r.fill_type): r for r in reports}

    for fill in fills:
        lines.append(f"## Fill type: {fill}")
        lines.append("")
        header = "| Model |" + "".join(f" {d} C | {d} R | {d} EAR |" for d in datasets)
        sep = "|---|" + "---|" * (3 * len(datasets))
        lines.extend([header, sep])
        for m in models:
            cells = []
            for d in datasets:
                rep = index.get((m, d, fill))
                if rep is None:
                    cells.extend(["-", "-", "-"])
                else:
                    cells.extend([_fmt(rep.C), _fmt(rep.R), _fmt(rep.EAR)])
            lines.append("| " + m + " | " + " | ".join(cells) + " |")
        lines.append("")

    if taus:
        lines.append("## Ranking stability across fill types (Kendall tau-b)")
        lines.append("")
        lines.append("| Fill pair | tau |")
        lines.append("|---|---|")
        for (f1, f2), tau in sorted(taus.items()):
            lines.append(f"| {f1} vs {f2} | {tau:.3f} |")
        lines.append("")
    return "\n".join(lines)
