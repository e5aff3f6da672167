"""Confusion matrices and per-class precision / recall / F1 (in percent)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ecgbo.errors import DataError


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted class
    class_names: tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0


class ClassScores(NamedTuple):
    precision: float
    recall: float
    f1: float
    undefined: bool  # a zero denominator was replaced by 0


def confusion(y_true, y_pred, k: int, class_names: Sequence[str] | None = None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise DataError("y_true and y_pred lengths differ")
    if y_true.size and (min(y_true.min(), y_pred.min()) < 0 or max(y_true.max(), y_pred.max()) >= k):
        raise DataError(f"label out of range for {k} classes")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    names = tuple(class_names) if class_names is not None else tuple(str(i) for i in range(k))
    return ConfusionMatrix(counts, names)


def _ratio(num: float, den: float) -> tuple[float, bool]:
    return (100.0 * num / den, False) if den > 0 else (0.0, True)


def precision_recall_f1(cm: ConfusionMatrix, c: int) -> ClassScores:
    """Recall = TP/(TP+FN), precision = TP/(TP+FP), F1 = 2TP/(2TP+FP+FN), all x100."""
    tp = float(cm.counts[c, c])
    fn = float(cm.counts[c].sum() - tp)
    fp = float(cm.counts[:, c].sum() - tp)
    p, p_bad = _ratio(tp, tp + fp)
    r, r_bad = _ratio(tp, tp + fn)
    f, f_bad = _ratio(2 * tp, 2 * tp + fp + fn)
    return ClassScores(p, r, f, p_bad or r_bad or f_bad)


def macro_scores(cm: ConfusionMatrix) -> ClassScores:
    per = [precision_recall_f1(cm, c) for c in range(len(cm.counts))]
    return ClassScores(float(np.mean([s.precision for s in per])),
                       float(np.mean([s.recall for s in per])),
                       float(np.mean([s.f1 for s in per])),
                       any(s.undefined for s in per))


def f1_from_pr(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def normalized_confusion(cm: ConfusionMatrix) -> np.ndarray:
    """Row-normalized matrix; all-zero rows stay zero."""
    counts = cm.counts.astype(np.float64)
    sums = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0)


def metrics_csv(cm: ConfusionMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "precision", "recall", "f1"])
    for c, name in enumerate(cm.class_names):
        s = precision_recall_f1(cm, c)
        w.writerow([name, f"{s.precision:.4f}", f"{s.recall:.4f}", f"{s.f1:.4f}"])
    m = macro_scores(cm)
    w.writerow(["macro", f"{m.precision:.4f}", f"{m.recall:.4f}", f"{m.f1:.4f}"])
    w.writerow(["accuracy", f"{100 * cm.accuracy():.4f}", "", ""])
    return buf.getvalue()


def matrix_csv(cm: ConfusionMatrix, values: np.ndarray | None = None, fmt: str = "{:d}") -> str:
    values = cm.counts if values is None else values
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true\\pred", *cm.class_names])
    for name, row in zip(cm.class_names, values):
        w.writerow([name, *[fmt.format(v) for v in row]])
    return buf.getvalue()


def read_matrix_csv(text: str) -> ConfusionMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    names = tuple(rows[0][1:])
    counts = np.array([[int(v) for v in r[1:]] for r in rows[1:]], dtype=np.int64)
    return ConfusionMatrix(counts, names)
