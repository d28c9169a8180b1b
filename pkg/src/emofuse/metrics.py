"""Confusion-matrix classification metrics: accuracy, per-class P/R/F1,
macro-F1, weighted accuracy (WA) and unweighted accuracy (UA).

WA is the overall fraction correct; UA is the unweighted mean of per-class
recalls; macro-F1 averages per-class F1 over classes present in the true
labels (absent classes would be 0/0).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LabelOutOfRange, LengthMismatch


@dataclass
class ClassStats:
    label: int
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    confusion: np.ndarray            # C x C counts, rows = true, cols = predicted
    accuracy: float
    macro_f1: float
    weighted_f1: float
    weighted_accuracy: float         # == accuracy
    unweighted_accuracy: float       # mean per-class recall
    per_class: list[ClassStats] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "weighted_accuracy": self.weighted_accuracy,
            "unweighted_accuracy": self.unweighted_accuracy,
            "per_class": [
                {"label": c.label, "precision": c.precision, "recall": c.recall,
                 "f1": c.f1, "support": c.support}
                for c in self.per_class
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            confusion=np.asarray(d["confusion"], dtype=np.int64),
            accuracy=float(d["accuracy"]),
            macro_f1=float(d["macro_f1"]),
            weighted_f1=float(d["weighted_f1"]),
            weighted_accuracy=float(d["weighted_accuracy"]),
            unweighted_accuracy=float(d["unweighted_accuracy"]),
            per_class=[ClassStats(int(c["label"]), float(c["precision"]),
                                  float(c["recall"]), float(c["f1"]),
                                  int(c["support"]))
                       for c in d.get("per_class", [])],
        )

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls.from_dict(json.loads(text))


def compute_metrics(true_labels: Sequence[int],
                    predicted_labels: Sequence[int],
                    n_classes: int) -> MetricsReport:
    true = np.asarray(true_labels, dtype=np.int64)
    pred = np.asarray(predicted_labels, dtype=np.int64)
    if true.shape != pred.shape or true.ndim != 1:
        raise LengthMismatch(
            f"label vectors differ: {true.shape} vs {pred.shape}")
    if true.size == 0:
        raise LengthMismatch("label vectors must be non-empty")
    for name, arr in (("true", true), ("predicted", pred)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise LabelOutOfRange(
                f"{name} labels must lie in 0..{n_classes - 1}")

    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (true, pred), 1)

    total = confusion.sum()
    accuracy = float(confusion.trace() / total)

    per_class: list[ClassStats] = []
    recalls, f1s, supports = [], [], []
    for c in range(n_classes):
        tp = confusion[c, c]
        support = int(confusion[c].sum())       # row = true class count
        col = int(confusion[:, c].sum())        # predicted as c
        precision = float(tp / col) if col > 0 else 0.0
        recall = float(tp / support) if support > 0 else 0.0
        f1 = (2.0 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        per_class.append(ClassStats(label=c, precision=precision,
                                    recall=recall, f1=f1, support=support))
        if support > 0:
            recalls.append(recall)
            f1s.append(f1)
            supports.append(support)

    macro_f1 = float(np.mean(f1s))
    weighted_f1 = float(np.average(f1s, weights=supports))
    unweighted_accuracy = float(np.mean(recalls))

    return MetricsReport(
        confusion=confusion,
        accuracy=accuracy,
        macro_f1=macro_f1,
        weighted_f1=weighted_f1,
        weighted_accuracy=accuracy,
        unweighted_accuracy=unweighted_accuracy,
        per_class=per_class,
    )
