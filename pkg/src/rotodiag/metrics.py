"""Confusion-matrix evaluation: accuracy, macro precision/recall, F1, F-beta.

Per-class scores use the one-vs-rest reduction; macro averages are unweighted
means over the full class inventory, with zero-denominator classes
contributing 0 rather than being skipped.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import BadClassId, EmptyMatrix, LengthMismatch


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted class

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if (self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]
                or (self.counts < 0).any()):
            raise ValueError("confusion matrix must be square and non-negative")

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class EvalReport:
    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    fbeta_macro: float
    beta: float
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray

    CSV_FIELDS = ["accuracy", "precision_macro", "recall_macro",
                  "f1_macro", "fbeta_macro", "beta"]

    def csv_row(self) -> list[str]:
        return [repr(getattr(self, f)) for f in self.CSV_FIELDS]

    def text_block(self) -> str:
        out = io.StringIO()
        out.write(f"accuracy        {self.accuracy:.4f}\n")
        out.write(f"precision macro {self.precision_macro:.4f}\n")
        out.write(f"recall macro    {self.recall_macro:.4f}\n")
        out.write(f"F1 macro        {self.f1_macro:.4f}\n")
        out.write(f"F{self.beta:g} macro        {self.fbeta_macro:.4f}\n")
        return out.getvalue()


def confusion(y_true, y_pred, n_classes: int = 42) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise LengthMismatch(f"{y_true.size} true vs {y_pred.size} predicted labels")
    for arr in (y_true, y_pred):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise BadClassId(f"class ids must lie in [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def _fbeta(precision: np.ndarray, recall: np.ndarray, beta: float) -> np.ndarray:
    b2 = beta * beta
    denom = b2 * precision + recall
    num = (1.0 + b2) * precision * recall
    return np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0)


def evaluate(cm: ConfusionMatrix, beta: float = 2.0) -> EvalReport:
    """Macro metrics over all classes of the matrix."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix holds no observations")
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(tp + fp > 0, tp / np.maximum(tp + fp, 1.0), 0.0)
        recall = np.where(tp + fn > 0, tp / np.maximum(tp + fn, 1.0), 0.0)
    return EvalReport(
        accuracy=float(tp.sum() / cm.total),
        precision_macro=float(precision.mean()),
        recall_macro=float(recall.mean()),
        f1_macro=float(_fbeta(precision, recall, 1.0).mean()),
        fbeta_macro=float(_fbeta(precision, recall, beta).mean()),
        beta=beta,
        per_class_precision=precision,
        per_class_recall=recall,
    )
