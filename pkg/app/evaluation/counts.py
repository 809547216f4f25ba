"""Binary confusion counts and the four headline metrics.

Zero denominators are reported as None for precision, recall and F1, never as 0.
Accuracy over all-zero counts has no meaning at all and raises.
"""

from __future__ import annotations

from collections.abc import Hashable, Sequence
from dataclasses import dataclass

from app.domain.exceptions import MetricUndefinedError, ShapeMismatchError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    @property
    def total(self) -> int:
        return self.positives + self.negatives

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(
            tp=self.tp + other.tp,
            tn=self.tn + other.tn,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
        )

    @classmethod
    def from_predictions(
        cls, truth: Sequence[bool], predicted: Sequence[bool]
    ) -> ConfusionCounts:
        if len(truth) != len(predicted):
            raise ShapeMismatchError("from_predictions", (len(truth),), (len(predicted),))
        tp = tn = fp = fn = 0
        for t, p in zip(truth, predicted, strict=True):
            if t and p:
                tp += 1
            elif p:
                fp += 1
            elif t:
                fn += 1
            else:
                tn += 1
        return cls(tp=tp, tn=tn, fp=fp, fn=fn)


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise MetricUndefinedError("accuracy is undefined on all-zero counts")
    return (c.tp + c.tn) / c.total


def precision(c: ConfusionCounts) -> float | None:
    if c.tp + c.fp == 0:
        return None
    return c.tp / (c.tp + c.fp)


def recall(c: ConfusionCounts) -> float | None:
    if c.tp + c.fn == 0:
        return None
    return c.tp / (c.tp + c.fn)


def f1(c: ConfusionCounts) -> float | None:
    """TP / (TP + (FP + FN) / 2); the harmonic mean of precision and recall when both exist."""
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        return None
    return 2 * c.tp / denom


def per_class_counts(
    truth: Sequence[Hashable], predicted: Sequence[Hashable], classes: Sequence[Hashable]
) -> dict[Hashable, ConfusionCounts]:
    """One-vs-rest counts for each class."""
    if len(truth) != len(predicted):
        raise ShapeMismatchError("per_class_counts", (len(truth),), (len(predicted),))
    return {
        c: ConfusionCounts.from_predictions([t == c for t in truth], [p == c for p in predicted])
        for c in classes
    }


def macro_f1(counts: dict[Hashable, ConfusionCounts]) -> float | None:
    """Mean F1 over the classes where it is defined."""
    scores = [s for s in (f1(c) for c in counts.values()) if s is not None]
    return sum(scores) / len(scores) if scores else None
