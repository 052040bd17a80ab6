"""Run and sweep metrics: online/final accuracy, budget-curve AUC, seed
aggregation, and the analysis breakdowns.  Pure functions over immutable run
records; report serialization is lossless and deterministic.

The scored window excludes warmup by default, matching the simulator's budget
accounting; pass include_warmup=True for sensitivity analysis.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .student import StudentModel, evaluate

if TYPE_CHECKING:
    from .data import Dataset, Instance
    from .simulator import ExperimentConfig, RunRecord, SweepCell

_AGGREGATED_FIELDS = (
    "online_accuracy",
    "final_accuracy",
    "teacher_calls",
    "teacher_label_accuracy_on_called",
    "retrain_count",
    "spend",
    "teacher_wrong_subset_accuracy",
)


@dataclass(frozen=True)
class RunMetrics:
    online_accuracy: float
    final_accuracy: float | None
    teacher_calls: int
    teacher_label_accuracy_on_called: float | None
    retrain_count: int
    spend: float
    pool_size: int
    filtered_drops: int
    teacher_wrong_subset_accuracy: float | None
    qbc_degenerate_decisions: int

    def to_dict(self) -> dict:
        return {
            "online_accuracy": self.online_accuracy,
            "final_accuracy": self.final_accuracy,
            "teacher_calls": self.teacher_calls,
            "teacher_label_accuracy_on_called": self.teacher_label_accuracy_on_called,
            "retrain_count": self.retrain_count,
            "spend": self.spend,
            "pool_size": self.pool_size,
            "filtered_drops": self.filtered_drops,
            "teacher_wrong_subset_accuracy": self.teacher_wrong_subset_accuracy,
            "qbc_degenerate_decisions": self.qbc_degenerate_decisions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunMetrics":
        return cls(**d)


def online_accuracy(record: "RunRecord", include_warmup: bool = False) -> float:
    """Fraction of emitted labels matching gold over the scored window."""
    entries = (record.warmup_trace + record.trace) if include_warmup else record.trace
    if not entries:
        raise ValueError("run trace is empty; nothing to score")
    return float(np.mean([e.correct for e in entries]))


def teacher_wrong_subset_accuracy(model: StudentModel,
                                  test: Sequence["Instance"]) -> float | None:
    """Final-student accuracy on test instances the teacher got wrong; None
    when the teacher is perfect on the test set."""
    subset = [inst for inst in test if inst.teacher_label != inst.gold]
    if not subset:
        return None
    return evaluate(model, subset)


def run_metrics(record: "RunRecord", dataset: "Dataset",
                include_warmup: bool = False) -> RunMetrics:
    called = [e for e in record.trace if e.teacher_called]
    return RunMetrics(
        online_accuracy=online_accuracy(record, include_warmup=include_warmup),
        final_accuracy=evaluate(record.final_model, dataset.test) if dataset.test else None,
        teacher_calls=len(record.ledger.spend_log),
        teacher_label_accuracy_on_called=(
            float(np.mean([e.correct for e in called])) if called else None
        ),
        retrain_count=len(record.retrain_events),
        spend=record.ledger.spent,
        pool_size=record.pool_size,
        filtered_drops=record.filtered_drops,
        teacher_wrong_subset_accuracy=(
            teacher_wrong_subset_accuracy(record.final_model, dataset.test)
            if dataset.test else None
        ),
        qbc_degenerate_decisions=record.qbc_degenerate_decisions,
    )


def auc_over_budgets(points: Sequence[tuple[float, float]]) -> float:
    """Trapezoid integral of accuracy over the budget grid, divided by the
    budget range; a single point reduces to its accuracy."""
    if not points:
        raise ValueError("need at least one (budget, accuracy) point")
    budgets = [b for b, _ in points]
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError(f"budgets must be strictly increasing, got {budgets}")
    if len(points) == 1:
        return float(points[0][1])
    xs = np.array(budgets, dtype=float)
    ys = np.array([a for _, a in points], dtype=float)
    area = float(np.sum((ys[1:] + ys[:-1]) * 0.5 * np.diff(xs)))
    return area / float(xs[-1] - xs[0])


def aggregate_seeds(cells: Sequence[RunMetrics]) -> dict[str, dict[str, float | None]]:
    """Arithmetic mean and population variance per metric across seeds.

    Absent values (None) are skipped; a metric absent everywhere aggregates
    to None.  The result is invariant to input order.
    """
    if not cells:
        raise ValueError("cannot aggregate an empty cell list")
    out: dict[str, dict[str, float | None]] = {}
    for name in _AGGREGATED_FIELDS:
        values = [getattr(c, name) for c in cells if getattr(c, name) is not None]
        if values:
            arr = np.array(values, dtype=float)
            out[name] = {
                "mean": float(np.mean(arr)),
                "variance": float(np.var(arr)),
                "count": len(values),
            }
        else:
            out[name] = {"mean": None, "variance": None, "count": 0}
    return out


def oracle_delta(
    with_filter: Sequence[tuple["ExperimentConfig", RunMetrics]],
    without_filter: Sequence[tuple["ExperimentConfig", RunMetrics]],
) -> tuple[float, float]:
    """Mean (online, final) accuracy improvement from oracle filtering over
    positionally paired runs whose configs differ only in the filter flag."""
    import dataclasses

    if len(with_filter) != len(without_filter) or not with_filter:
        raise ValueError("need equal-length, nonempty paired run lists")
    d_online, d_final = [], []
    for (cfg_w, m_w), (cfg_o, m_o) in zip(with_filter, without_filter):
        if not cfg_w.oracle_filter or cfg_o.oracle_filter:
            raise ValueError("pairs must be (filtered, unfiltered) in that order")
        if dataclasses.replace(cfg_w, oracle_filter=False) != cfg_o:
            raise ValueError("paired configs differ beyond the oracle_filter flag")
        d_online.append(m_w.online_accuracy - m_o.online_accuracy)
        if m_w.final_accuracy is not None and m_o.final_accuracy is not None:
            d_final.append(m_w.final_accuracy - m_o.final_accuracy)
    return (
        float(np.mean(d_online)),
        float(np.mean(d_final)) if d_final else float("nan"),
    )


@dataclass
class SweepReport:
    dataset: str
    policies: list[str]
    budgets: list[float]
    seeds: list[int]
    cells: list[dict] = field(default_factory=list)    # policy/budget/seed/metrics
    summary: list[dict] = field(default_factory=list)  # policy/budget/aggregates
    auc: dict = field(default_factory=dict)            # policy -> metric -> value

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "policies": self.policies,
            "budgets": self.budgets,
            "seeds": self.seeds,
            "cells": self.cells,
            "summary": self.summary,
            "auc": self.auc,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SweepReport":
        return cls(**d)


def build_report(dataset_name: str, cells: Sequence["SweepCell"]) -> SweepReport:
    if not cells:
        raise ValueError("cannot build a report from zero cells")
    policies = sorted({c.policy for c in cells})
    budgets = sorted({c.budget for c in cells})
    seeds = sorted({c.seed for c in cells})

    cell_rows = [
        {"policy": c.policy, "budget": c.budget, "seed": c.seed,
         "metrics": c.metrics.to_dict()}
        for c in sorted(cells, key=lambda c: (c.policy, c.budget, c.seed))
    ]

    summary_rows = []
    curve: dict[str, dict[str, list]] = {p: {"online": [], "final": []} for p in policies}
    for policy in policies:
        for budget in budgets:
            group = [c.metrics for c in cells if c.policy == policy and c.budget == budget]
            if not group:
                continue
            agg = aggregate_seeds(group)
            summary_rows.append({"policy": policy, "budget": budget, "aggregates": agg})
            curve[policy]["online"].append((budget, agg["online_accuracy"]["mean"]))
            if agg["final_accuracy"]["mean"] is not None:
                curve[policy]["final"].append((budget, agg["final_accuracy"]["mean"]))

    auc = {}
    for policy in policies:
        entry = {"online_accuracy": auc_over_budgets(curve[policy]["online"])}
        entry["final_accuracy"] = (
            auc_over_budgets(curve[policy]["final"]) if curve[policy]["final"] else None
        )
        auc[policy] = entry

    return SweepReport(
        dataset=dataset_name,
        policies=policies,
        budgets=budgets,
        seeds=seeds,
        cells=cell_rows,
        summary=summary_rows,
        auc=auc,
    )


def report_to_json(report: SweepReport) -> str:
    return json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> SweepReport:
    return SweepReport.from_json_dict(json.loads(text))


CURVE_COLUMNS = (
    "policy",
    "budget",
    "online_accuracy_mean",
    "online_accuracy_variance",
    "final_accuracy_mean",
    "final_accuracy_variance",
    "teacher_calls_mean",
    "spend_mean",
    "seeds",
)


def curve_rows(report: SweepReport) -> list[dict]:
    """Plot-ready rows: budget vs mean accuracy vs variance, per policy."""
    rows = []
    for entry in report.summary:
        agg = entry["aggregates"]
        rows.append({
            "policy": entry["policy"],
            "budget": entry["budget"],
            "online_accuracy_mean": agg["online_accuracy"]["mean"],
            "online_accuracy_variance": agg["online_accuracy"]["variance"],
            "final_accuracy_mean": agg["final_accuracy"]["mean"],
            "final_accuracy_variance": agg["final_accuracy"]["variance"],
            "teacher_calls_mean": agg["teacher_calls"]["mean"],
            "spend_mean": agg["spend"]["mean"],
            "seeds": agg["online_accuracy"]["count"],
        })
    return rows


def write_curves_csv(report: SweepReport, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CURVE_COLUMNS)
        writer.writeheader()
        for row in curve_rows(report):
            writer.writerow({k: ("" if row[k] is None else row[k]) for k in CURVE_COLUMNS})
    os.replace(tmp, path)


def write_report(report: SweepReport, out_dir: str) -> tuple[str, str]:
    """Write report.json and curves.csv atomically; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "report.json")
    tmp = report_path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))
    os.replace(tmp, report_path)
    curves_path = os.path.join(out_dir, "curves.csv")
    write_curves_csv(report, curves_path)
    return report_path, curves_path
