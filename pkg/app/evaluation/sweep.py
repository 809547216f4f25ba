"""Softmax-threshold sweep over event, other-soccer and non-soccer images.

For each threshold t an image is accepted when it passed the VAE gate and its top
probability is strictly above t; an accepted image counts as an event prediction unless
its top class is a scene class. Event F1 is detection-style: a wrong event kind is both
a false positive and a false negative.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field

from app.classifier.labels import (
    ClassLabel,
    NineClassView,
    PoolLabel,
    is_event_label,
    is_scene_class,
    merge_card_labels,
)
from app.classifier.model import ClassifierModel
from app.classifier.service import predict_probs
from app.domain.exceptions import ConfigValidationError, MetricUndefinedError
from app.evaluation.counts import ConfusionCounts, f1, precision, recall
from app.nn.data import to_batch
from app.synth.schemas import LabeledImage
from app.vae.model import VaeModel
from app.vae.service import image_losses

logger = logging.getLogger("app.evaluation")

ScoreGroup = Literal["event", "other_soccer", "non_soccer"]
SCORE_GROUPS: tuple[ScoreGroup, ...] = ("event", "other_soccer", "non_soccer")
DEFAULT_THRESHOLDS: tuple[float, ...] = (0.99, 0.95, 0.9, 0.85, 0.8, 0.7, 0.6, 0.5)


@dataclass(frozen=True)
class ScoredImage:
    group: ScoreGroup
    truth: NineClassView | None
    top_class: NineClassView
    top_prob: float
    gate_passed: bool = True

    def accepted(self, threshold: float) -> bool:
        return self.gate_passed and self.top_prob > threshold

    def predicted_event(self, threshold: float) -> bool:
        return self.accepted(threshold) and not is_scene_class(self.top_class)


class SweepRow(BaseModel):
    threshold: float
    f1_event: float | None
    precision_event: float | None
    recall_event: float | None
    recall_nonsoccer: float | None = Field(
        description="Non-soccer images not reported as events."
    )
    recall_no_highlight: float | None = Field(
        description="Other-soccer and non-soccer images not reported as events."
    )
    accepted_count: int


class SweepReport(BaseModel):
    rows: list[SweepRow]
    best_threshold: float

    @property
    def best(self) -> SweepRow:
        return next(r for r in self.rows if r.threshold == self.best_threshold)


def group_of(label: ClassLabel | PoolLabel) -> ScoreGroup:
    """Scene-class frames are soccer without a highlight, like the other-soccer pool."""
    if label is PoolLabel.NON_SOCCER:
        return "non_soccer"
    if label is PoolLabel.OTHER_SOCCER or not is_event_label(label):
        return "other_soccer"
    return "event"


def score_images(
    items: Sequence[LabeledImage],
    classifier: ClassifierModel,
    *,
    vae: VaeModel | None = None,
    vae_threshold: float | None = None,
) -> list[ScoredImage]:
    """Run the gate (when given) and the 9-class classifier over labeled images."""
    if classifier.config.label_space != "nine":
        raise ConfigValidationError("the sweep scores the merged 9-class classifier")
    images = [item.image for item in items]
    probs = predict_probs(classifier, to_batch(images, classifier.config.input_size))
    passed = np.ones(len(items), dtype=bool)
    if vae is not None:
        threshold = vae.config.loss_threshold if vae_threshold is None else vae_threshold
        if threshold is None:
            raise ConfigValidationError("scoring with the gate needs a loss threshold")
        passed = image_losses(vae, to_batch(images, vae.config.input_size)) <= threshold
    scored = []
    for item, row, ok in zip(items, probs, passed, strict=True):
        group = group_of(item.label)
        top = int(np.argmax(row))
        truth = merge_card_labels(ClassLabel(item.label)) if group == "event" else None
        scored.append(
            ScoredImage(
                group=group,
                truth=truth,
                top_class=NineClassView(classifier.config.classes[top]),
                top_prob=float(row[top]),
                gate_passed=bool(ok),
            )
        )
    return scored


def event_counts(items: Iterable[ScoredImage], threshold: float) -> ConfusionCounts:
    tp = tn = fp = fn = 0
    for item in items:
        predicted = item.predicted_event(threshold)
        if item.group == "event":
            if predicted and item.top_class is item.truth:
                tp += 1
            elif predicted:
                fp += 1
                fn += 1
            else:
                fn += 1
        elif predicted:
            fp += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def _rejection_recall(items: Sequence[ScoredImage], threshold: float) -> float | None:
    if not items:
        return None
    return sum(not item.predicted_event(threshold) for item in items) / len(items)


def _check_thresholds(thresholds: Iterable[float]) -> list[float]:
    ordered = sorted(set(thresholds), reverse=True)
    if not ordered:
        raise ConfigValidationError("threshold sweep needs at least one threshold")
    for t in ordered:
        if not 0.0 <= t < 1.0:
            raise ConfigValidationError(f"softmax threshold must lie in [0, 1), got {t}")
    return ordered


def sweep_row(items: Sequence[ScoredImage], threshold: float) -> SweepRow:
    counts = event_counts(items, threshold)
    nonsoccer = [i for i in items if i.group == "non_soccer"]
    no_highlight = [i for i in items if i.group != "event"]
    return SweepRow(
        threshold=threshold,
        f1_event=f1(counts),
        precision_event=precision(counts),
        recall_event=recall(counts),
        recall_nonsoccer=_rejection_recall(nonsoccer, threshold),
        recall_no_highlight=_rejection_recall(no_highlight, threshold),
        accepted_count=sum(item.accepted(threshold) for item in items),
    )


def threshold_sweep(
    items: Sequence[ScoredImage], thresholds: Iterable[float] = DEFAULT_THRESHOLDS
) -> SweepReport:
    """One row per threshold, highest first; the best row maximizes F1 + non-soccer recall."""
    missing = [g for g in SCORE_GROUPS if not any(i.group == g for i in items)]
    if missing:
        raise MetricUndefinedError(f"threshold sweep needs every group, missing {missing}")
    rows = [sweep_row(items, t) for t in _check_thresholds(thresholds)]
    best = max(rows, key=lambda r: (r.f1_event or 0.0) + (r.recall_nonsoccer or 0.0))
    logger.info(
        "threshold sweep finished",
        extra={"component": "evaluation", "threshold": best.threshold},
    )
    return SweepReport(rows=rows, best_threshold=best.threshold)
