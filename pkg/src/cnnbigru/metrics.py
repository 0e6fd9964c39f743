"""Confusion matrix and one-vs-rest precision / recall / F1 with macro averaging.

Macro F1 is the unweighted mean of the per-class F1 values, not the harmonic
mean of macro precision and macro recall.  A metric whose denominator is zero
is reported as 0.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted class

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(true_labels, predicted_labels, n_classes: int) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=np.int64).ravel()
    p = np.asarray(predicted_labels, dtype=np.int64).ravel()
    if t.shape != p.shape:
        raise DomainError(f"{t.size} true labels but {p.size} predictions")
    for arr in (t, p):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise DomainError(f"labels must lie in [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def _ratio(num, den):
    return np.divide(num, den, out=np.zeros_like(num, dtype=np.float64), where=den > 0)


def bounded_mean(values) -> float:
    """Correctly rounded mean, clipped so rounding never leaves [min, max]."""
    values = [float(v) for v in values]
    return min(max(math.fsum(values) / len(values), min(values)), max(values))


def pct(value: float) -> str:
    return f"{100.0 * value:.2f}%"


@dataclass
class EvalReport:
    precision: list[float]
    recall: list[float]
    f1: list[float]
    accuracy: float
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.precision) == len(self.recall) == len(self.f1)):
            raise DomainError("per-class metric lists differ in length")
        if not self.class_names:
            self.class_names = [str(i) for i in range(len(self.precision))]

    @property
    def macro_precision(self) -> float:
        return float(np.mean(self.precision))

    @property
    def macro_recall(self) -> float:
        return float(np.mean(self.recall))

    @property
    def macro_f1(self) -> float:
        return float(np.mean(self.f1))

    @property
    def per_class(self) -> list[tuple[float, float, float]]:
        return list(zip(self.precision, self.recall, self.f1))

    def summary(self) -> dict[str, float]:
        return {
            "precision": self.macro_precision,
            "recall": self.macro_recall,
            "f1": self.macro_f1,
            "accuracy": self.accuracy,
        }

    def to_dict(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "accuracy": self.accuracy,
            **{f"macro_{k}": v for k, v in self.summary().items() if k != "accuracy"},
        }

    @classmethod
    def mean(cls, reports: list["EvalReport"]) -> "EvalReport":
        columns = lambda attr: [bounded_mean(col) for col in zip(*(getattr(r, attr) for r in reports))]  # noqa: E731
        return cls(
            columns("precision"),
            columns("recall"),
            columns("f1"),
            bounded_mean(r.accuracy for r in reports),
            reports[0].class_names,
        )

    def to_table(self, title: str = "") -> str:
        """Per-class rows, then the accuracy / macro row, percentages at 2 decimals."""
        width = max([5, *map(len, self.class_names)])
        lines = [title] if title else []
        lines.append(f"{'Num':<4} {'Class':<{width}} {'Precision':>10} {'Recall':>10} {'F1-Score':>10}")
        for i, (name, (p, r, f)) in enumerate(zip(self.class_names, self.per_class)):
            lines.append(f"{i:<4} {name:<{width}} {pct(p):>10} {pct(r):>10} {pct(f):>10}")
        lines.append(f"{'Metric':<8} {'Accuracy':>10} {'Macro Precision':>16} {'Macro Recall':>13} {'Macro F1-Score':>15}")
        lines.append(f"{'Value':<8} {pct(self.accuracy):>10} {pct(self.macro_precision):>16} "
                     f"{pct(self.macro_recall):>13} {pct(self.macro_f1):>15}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["num", "class", "precision", "recall", "f1"])
        for i, (name, (p, r, f)) in enumerate(zip(self.class_names, self.per_class)):
            w.writerow([i, name, repr(p), repr(r), repr(f)])
        w.writerow(["", "macro", repr(self.macro_precision), repr(self.macro_recall), repr(self.macro_f1)])
        w.writerow(["", "accuracy", repr(self.accuracy), "", ""])
        return buf.getvalue()


def report(cm: ConfusionMatrix, class_names=None) -> EvalReport:
    """One-vs-rest precision, recall, F1 per class plus accuracy."""
    counts = np.asarray(cm.counts)
    total = counts.sum()
    if total == 0:
        raise DomainError("cannot report on an empty confusion matrix")
    tp = np.diag(counts).astype(np.float64)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    return EvalReport(precision.tolist(), recall.tolist(), f1.tolist(), float(tp.sum() / total),
                      list(class_names or []))


def evaluate(true_labels, predicted_labels, class_names) -> EvalReport:
    return report(confusion(true_labels, predicted_labels, len(class_names)), class_names)
