"""Confusion matrices and precision/recall/F1 reporting."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i, j] = samples of true class i predicted as class j."""

    counts: np.ndarray
    classes: tuple

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError("confusion matrix must be square")
        if counts.shape[0] != len(self.classes):
            raise ValueError("class list does not match matrix size")
        if (counts < 0).any():
            raise ValueError("confusion counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "classes", tuple(self.classes))

    @classmethod
    def from_predictions(cls, y_true, y_pred, classes):
        index = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            counts[index[t], index[p]] += 1
        return cls(counts, tuple(classes))

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        total = self.total
        return float(np.trace(self.counts) / total) if total else 0.0


def f1_score(precision, recall):
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    per_class: dict  # class name -> {"precision", "recall", "f1"}
    macro_precision: float
    macro_recall: float
    macro_f1: float
    positive_class: str | None = None
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "per_class": self.per_class,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "positive_class": self.positive_class,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def metrics(cm, positive_class=None):
    """Per-class one-vs-rest precision, recall and F1 from a confusion matrix.

    precision = TP / (TP + FP), recall = TP / (TP + FN),
    F1 = 2 p r / (p + r); every 0/0 is reported as 0.
    """
    if cm.total == 0:
        raise ValueError("confusion matrix is empty")
    counts = cm.counts
    per_class = {}
    for i, name in enumerate(cm.classes):
        tp = counts[i, i]
        fp = counts[:, i].sum() - tp
        fn = counts[i, :].sum() - tp
        p = float(tp / (tp + fp)) if tp + fp else 0.0
        r = float(tp / (tp + fn)) if tp + fn else 0.0
        per_class[name] = {"precision": p, "recall": r, "f1": f1_score(p, r)}
    macro_p = float(np.mean([v["precision"] for v in per_class.values()]))
    macro_r = float(np.mean([v["recall"] for v in per_class.values()]))
    macro_f = float(np.mean([v["f1"] for v in per_class.values()]))
    pos = None
    p = r = f = None
    if positive_class is not None:
        if positive_class not in per_class:
            raise ValueError(f"unknown positive class {positive_class!r}")
        pos = positive_class
        p = per_class[pos]["precision"]
        r = per_class[pos]["recall"]
        f = per_class[pos]["f1"]
    return MetricsReport(
        accuracy=cm.accuracy,
        per_class=per_class,
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f,
        positive_class=pos,
        precision=p,
        recall=r,
        f1=f,
    )
