"""Accuracy-vs-budget figures for sweep reports.

Rendering lives behind the CLI report path; the metrics library itself only
emits data.  Figures are written next to the delimited curve output.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .metrics import SweepReport, curve_rows  # noqa: E402

_METRICS = (
    ("online_accuracy", "Online accuracy"),
    ("final_accuracy", "Final accuracy"),
)


def render_curves(report: SweepReport, out_dir: str) -> list[str]:
    """One PNG per accuracy metric: budget on x, seed mean with ±1 std bars
    per policy.  Returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    rows = curve_rows(report)
    written = []
    for metric, title in _METRICS:
        series = {}
        for row in rows:
            mean = row[f"{metric}_mean"]
            if mean is None:
                continue
            var = row[f"{metric}_variance"] or 0.0
            series.setdefault(row["policy"], []).append(
                (row["budget"], mean, var ** 0.5)
            )
        if not series:
            continue
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for policy in sorted(series):
            pts = sorted(series[policy])
            ax.errorbar(
                [p[0] for p in pts],
                [p[1] for p in pts],
                yerr=[p[2] for p in pts],
                marker="o",
                capsize=3,
                label=policy,
            )
        ax.set_xlabel("budget")
        ax.set_ylabel(title.lower())
        ax.set_title(f"{title} vs budget — {report.dataset}")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, f"{metric}.png")
        tmp = path + ".tmp.png"
        fig.savefig(tmp, dpi=150)
        plt.close(fig)
        os.replace(tmp, path)
        written.append(path)
    return written
