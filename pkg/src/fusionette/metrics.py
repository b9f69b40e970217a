"""Classification metrics: accuracy, macro F1, weighted F1, confusion matrix.

Conventions: confusion rows are true classes, columns predictions.
Per-class F1 uses the 0/0 -> 0 rule, and macro F1 averages over the full
label space (classes with no support still count), which is the usual
reading on imbalanced data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class MetricsReport:
    accuracy: float
    macro_f1: float
    weighted_f1: float
    confusion: list[list[float]]
    per_class_f1: list[float]
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "confusion": self.confusion,
            "per_class_f1": self.per_class_f1,
            "n_samples": self.n_samples,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**d)


def confusion_matrix(labels, preds, num_classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    p = np.asarray(preds, dtype=np.int64)
    if y.shape != p.shape or y.ndim != 1:
        raise DataError(f"labels {y.shape} and predictions {p.shape} must be equal-length vectors")
    if y.size == 0:
        raise DataError("cannot compute metrics on an empty sample")
    for name, v in (("label", y), ("prediction", p)):
        if v.min() < 0 or v.max() >= num_classes:
            raise DataError(f"{name} outside [0, {num_classes})")
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(conf, (y, p), 1)
    return conf


def report_from_confusion(conf) -> MetricsReport:
    stored = np.asarray(conf)
    c = stored.astype(np.float64)
    n = c.sum()
    if n <= 0:
        raise DataError("confusion matrix is empty")
    support = c.sum(axis=1)
    predicted = c.sum(axis=0)
    tp = np.diag(c)
    f1 = np.zeros(c.shape[0])
    for k in range(c.shape[0]):
        precision = tp[k] / predicted[k] if predicted[k] > 0 else 0.0
        recall = tp[k] / support[k] if support[k] > 0 else 0.0
        if precision + recall > 0:
            f1[k] = 2.0 * precision * recall / (precision + recall)
    return MetricsReport(
        accuracy=float(tp.sum() / n),
        macro_f1=float(f1.mean()),
        weighted_f1=float((support / n) @ f1),
        confusion=stored.tolist(),
        per_class_f1=f1.tolist(),
        n_samples=int(n),
    )


def report_from_labels(labels, preds, num_classes: int) -> MetricsReport:
    return report_from_confusion(confusion_matrix(labels, preds, num_classes))


def average_reports(reports: list[MetricsReport]) -> MetricsReport:
    """Arithmetic mean across runs evaluated on the same sample set."""
    if not reports:
        raise DataError("no reports to average")
    n = reports[0].n_samples
    if any(r.n_samples != n for r in reports):
        raise DataError("cannot average reports over different sample counts")
    confs = np.array([r.confusion for r in reports], dtype=np.float64)
    f1s = np.array([r.per_class_f1 for r in reports], dtype=np.float64)
    return MetricsReport(
        accuracy=float(np.mean([r.accuracy for r in reports])),
        macro_f1=float(np.mean([r.macro_f1 for r in reports])),
        weighted_f1=float(np.mean([r.weighted_f1 for r in reports])),
        confusion=confs.mean(axis=0).tolist(),
        per_class_f1=f1s.mean(axis=0).tolist(),
        n_samples=n,
    )
