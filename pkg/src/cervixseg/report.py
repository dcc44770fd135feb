"""Evaluation report rendering: delimited per-image output plus figures.

Figures are written as PNG files next to the metrics JSON: ROC curve,
confusion matrix, per-image IoU histogram and training loss curves.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import ConfusionMatrix, MetricsReport

__all__ = [
    "write_per_image_csv",
    "save_roc_curve",
    "save_confusion_figure",
    "save_iou_histogram",
    "save_loss_curves",
    "render_eval_report",
]

CSV_FIELDS = ("id", "label", "score", "prediction", "iou")


def write_per_image_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in CSV_FIELDS})


def _roc_points(labels: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-scores, kind="stable")
    labels = labels[order]
    tps = np.cumsum(labels == 1)
    fps = np.cumsum(labels == 0)
    tpr = np.concatenate([[0.0], tps / max(tps[-1], 1)])
    fpr = np.concatenate([[0.0], fps / max(fps[-1], 1)])
    return fpr, tpr


def save_roc_curve(labels, scores, path, auc_value: float | None = None) -> None:
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if len(set(labels.tolist())) == 2:
        fpr, tpr = _roc_points(labels, scores)
        label = f"AUC = {auc_value:.3f}" if auc_value is not None else None
        ax.plot(fpr, tpr, lw=1.8, label=label)
        if label:
            ax.legend(loc="lower right")
    ax.plot([0, 1], [0, 1], ls="--", c="gray", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title("ROC")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_confusion_figure(cm: ConfusionMatrix, path) -> None:
    grid = np.array([[cm.tn, cm.fp], [cm.fn, cm.tp]], dtype=float)
    fig, ax = plt.subplots(figsize=(4.0, 3.6))
    ax.imshow(grid, cmap="Blues")
    for (i, j), v in np.ndenumerate(grid):
        ax.text(j, i, f"{int(v)}", ha="center", va="center",
                color="black" if v < grid.max() / 2 else "white")
    ax.set_xticks([0, 1], ["control", "preterm"])
    ax.set_yticks([0, 1], ["control", "preterm"])
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    ax.set_title("confusion matrix")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_iou_histogram(ious, path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.hist(np.asarray(ious, dtype=float), bins=20, range=(0, 1), color="#4878cf")
    ax.set_xlabel("per-image IoU")
    ax.set_ylabel("count")
    ax.set_title("segmentation overlap")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_loss_curves(history: list[dict], path) -> None:
    epochs = [h["epoch"] for h in history]
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for split in ("train", "val"):
        for part, ls in (("total", "-"), ("seg", "--"), ("cls", ":")):
            ax.plot(epochs, [h[split][part] for h in history], ls, lw=1.2,
                    label=f"{split} {part}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_eval_report(report: MetricsReport, rows: list[dict], out_dir, split: str) -> list[Path]:
    """Write metrics JSON, per-image CSV and the figure set for one split."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out_dir / f"metrics_{split}.json"
    report.save(json_path)
    written.append(json_path)

    csv_path = out_dir / f"eval_{split}.csv"
    write_per_image_csv(rows, csv_path)
    written.append(csv_path)

    labels = [r["label"] for r in rows]
    scores = [r["score"] for r in rows]
    roc_path = out_dir / f"roc_{split}.png"
    save_roc_curve(labels, scores, roc_path, auc_value=report.auc)
    written.append(roc_path)

    if report.confusion is not None:
        cm_path = out_dir / f"confusion_{split}.png"
        save_confusion_figure(report.confusion, cm_path)
        written.append(cm_path)

    hist_path = out_dir / f"iou_hist_{split}.png"
    save_iou_histogram([r["iou"] for r in rows], hist_path)
    written.append(hist_path)
    return written
