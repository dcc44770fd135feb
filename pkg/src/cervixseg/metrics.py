"""Evaluation metrics: per-image IoU, confusion-matrix rates, ROC AUC.

Rates with a zero denominator are reported as absent (None), never as 0.
The confusion matrix prints rows = actual, columns = predicted, control
before preterm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

__all__ = ["ConfusionMatrix", "MetricsReport", "iou", "confusion_and_rates", "roc_auc"]


@dataclass
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def table(self) -> str:
        rows = [
            "                 Predicted",
            "                 Control  Preterm",
            f"Actual Control   {self.tn:7d}  {self.fp:7d}",
            f"       Preterm   {self.fn:7d}  {self.tp:7d}",
        ]
        return "\n".join(rows)


def _rate(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


@dataclass
class MetricsReport:
    """Everything reported per evaluation split."""

    confusion: ConfusionMatrix | None = None
    recall: float | None = None  # sensitivity
    precision: float | None = None
    specificity: float | None = None
    fpr: float | None = None
    auc: float | None = None
    mean_iou: float | None = None
    iou_sd: float | None = None
    n_samples: int = 0
    threshold: float = 0.5
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = {
            "n_samples": self.n_samples,
            "threshold": self.threshold,
            "mean_iou": self.mean_iou,
            "iou_sd": self.iou_sd,
            "recall": self.recall,
            "precision": self.precision,
            "specificity": self.specificity,
            "fpr": self.fpr,
            "auc": self.auc,
            "confusion": None
            if self.confusion is None
            else {"tp": self.confusion.tp, "fp": self.confusion.fp, "fn": self.confusion.fn, "tn": self.confusion.tn},
        }
        if self.extras:
            doc["extras"] = self.extras
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "MetricsReport":
        conf = doc.get("confusion")
        return cls(
            confusion=None if conf is None else ConfusionMatrix(**conf),
            recall=doc.get("recall"),
            precision=doc.get("precision"),
            specificity=doc.get("specificity"),
            fpr=doc.get("fpr"),
            auc=doc.get("auc"),
            mean_iou=doc.get("mean_iou"),
            iou_sd=doc.get("iou_sd"),
            n_samples=doc.get("n_samples", 0),
            threshold=doc.get("threshold", 0.5),
            extras=doc.get("extras", {}),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    def __str__(self) -> str:
        def fmt(x):
            return "absent" if x is None else f"{x:.4f}"

        lines = [
            f"samples:     {self.n_samples} (threshold {self.threshold})",
            f"mean IoU:    {fmt(self.mean_iou)}"
            + (f" +- {self.iou_sd:.4f}" if self.iou_sd is not None else ""),
            f"recall:      {fmt(self.recall)}",
            f"precision:   {fmt(self.precision)}",
            f"specificity: {fmt(self.specificity)}",
            f"FPR:         {fmt(self.fpr)}",
            f"AUC:         {fmt(self.auc)}",
        ]
        if self.confusion is not None:
            lines.append(self.confusion.table())
        return "\n".join(lines)


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Jaccard index |a & b| / |a | b|; two empty masks count as 1.0."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    for m in (a, b):
        vals = np.unique(m)
        if not np.isin(vals, (0, 1)).all():
            raise ValueError(f"masks must be binary, found values {vals[:8]}")
    inter = np.logical_and(a, b).sum()
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(inter / union)


def confusion_and_rates(labels, scores, threshold: float = 0.5) -> MetricsReport:
    """Threshold scores at >= threshold and derive the confusion-matrix rates."""
    labels = np.asarray(labels).astype(int)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.size == 0:
        raise ValueError("confusion_and_rates needs at least one sample")
    if labels.shape != scores.shape:
        raise ValueError(f"labels shape {labels.shape} != scores shape {scores.shape}")
    pred = scores >= threshold
    actual = labels == 1
    tp = int(np.sum(pred & actual))
    fp = int(np.sum(pred & ~actual))
    fn = int(np.sum(~pred & actual))
    tn = int(np.sum(~pred & ~actual))
    cm = ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)
    fpr = _rate(fp, fp + tn)
    return MetricsReport(
        confusion=cm,
        recall=_rate(tp, tp + fn),
        precision=_rate(tp, tp + fp),
        specificity=None if fpr is None else 1.0 - fpr,
        fpr=fpr,
        n_samples=int(labels.size),
        threshold=threshold,
    )


def roc_auc(labels, scores) -> float:
    """Probability a random positive outranks a random negative, ties at 1/2.

    Mann-Whitney form via average ranks; identical to brute-force pair
    counting, including in floating point.
    """
    labels = np.asarray(labels).astype(int)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    ranks = rankdata(scores)  # average ranks; ties contribute exactly 1/2
    rank_sum = float(ranks[labels == 1].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)
