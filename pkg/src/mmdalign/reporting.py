"""Report rendering: delimited metric records, text tables, and figures.

Figures are written next to the delimited output. PNG metadata is stripped so
identical runs produce byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluator import BliReport, SimilarityReport
from .trainer import TrainHistory


def write_records(records: list[dict], path: str | Path) -> None:
    """One JSON object per line: {"metric": ..., "value": ..., "bucket": ...}."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def bli_records(report: BliReport) -> list[dict]:
    records = [
        {"metric": "p_at_1", "value": report.p_at_1, "bucket": "all"},
        {"metric": "p_at_5", "value": report.p_at_5, "bucket": "all"},
        {"metric": "n_evaluated", "value": report.n_evaluated, "bucket": "all"},
        {"metric": "n_skipped_oov", "value": report.n_skipped_oov, "bucket": "all"},
    ]
    for name, stats in report.buckets.items():
        records.append({"metric": "p_at_1", "value": stats.p_at_1, "bucket": name})
        records.append({"metric": "p_at_5", "value": stats.p_at_5, "bucket": name})
        records.append({"metric": "n_evaluated", "value": stats.n_evaluated,
                        "bucket": name})
    return records


def bli_table(report: BliReport, similarity: SimilarityReport | None = None) -> str:
    lines = [
        "bucket    P@1      P@5      n",
        f"all       {report.p_at_1:<8.4f} {report.p_at_5:<8.4f} {report.n_evaluated}",
    ]
    for name, stats in report.buckets.items():
        lines.append(f"{name:<9} {stats.p_at_1:<8.4f} {stats.p_at_5:<8.4f} "
                     f"{stats.n_evaluated}")
    lines.append(f"skipped OOV: {report.n_skipped_oov}")
    if similarity is not None:
        lines.append(f"word similarity Pearson r: {similarity.pearson_r:.4f} "
                     f"(n={similarity.n_evaluated}, oov={similarity.n_skipped_oov})")
    return "\n".join(lines) + "\n"


def save_figure(fig, path: str | Path) -> None:
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_training_history(history: TrainHistory, path: str | Path) -> None:
    """MMD^2 per step with the per-epoch validation criterion overlaid."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(history.step_mmd2, color="tab:blue", lw=1.0)
    ax.set_xlabel("training step")
    ax.set_ylabel("minibatch MMD$^2$", color="tab:blue")
    if history.epoch_criterion:
        steps_per_epoch = max(1, len(history.step_mmd2) // max(
            1, len(history.epoch_criterion)))
        xs = [(e + 1) * steps_per_epoch for e in range(len(history.epoch_criterion))]
        ax2 = ax.twinx()
        ax2.plot(xs, history.epoch_criterion, "o-", color="tab:orange")
        ax2.set_ylabel("validation criterion", color="tab:orange")
    fig.tight_layout()
    save_figure(fig, path)


def plot_bucket_accuracy(report: BliReport, path: str | Path) -> None:
    """Common vs rare precision bars."""
    names = list(report.buckets) or ["all"]
    p1 = [report.buckets[n].p_at_1 for n in report.buckets] or [report.p_at_1]
    p5 = [report.buckets[n].p_at_5 for n in report.buckets] or [report.p_at_5]
    x = range(len(names))
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar([i - 0.2 for i in x], p1, width=0.4, label="P@1")
    ax.bar([i + 0.2 for i in x], p5, width=0.4, label="P@5")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.legend()
    fig.tight_layout()
    save_figure(fig, path)


def plot_ablation(rows: list[tuple[str, float | None]], path: str | Path) -> None:
    """Bar chart of P@1 per pipeline variant; failed variants plot at zero."""
    names = [name for name, _ in rows]
    values = [v if v is not None else 0.0 for _, v in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(names, values, color="tab:blue")
    for bar, (_, v) in zip(bars, rows):
        if v is None:
            ax.text(bar.get_x() + bar.get_width() / 2, 0.02, "*",
                    ha="center", fontsize=16)
    ax.set_ylabel("P@1")
    ax.set_ylim(0, 1.05)
    fig.autofmt_xdate(rotation=20)
    fig.tight_layout()
    save_figure(fig, path)
