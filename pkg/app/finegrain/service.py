from __future__ import annotations

import csv
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from app.classifier.augment import augment
from app.classifier.labels import CARD_COLORS, CardColor, ClassLabel, NineClassView, card_color
from app.classifier.model import ClassifierModel
from app.classifier.service import predict_probs
from app.domain.exceptions import CheckpointError, DatasetError
from app.finegrain.mamc import mamc_loss
from app.finegrain.model import CardVerdict, FinegrainConfig, FinegrainModel, build_finegrain
from app.nn import functional as F
from app.nn.checkpoint import load_into, read_checkpoint, save_checkpoint
from app.nn.data import paired_minibatches, to_batch
from app.nn.optim import Adam
from app.nn.tensor import Tensor
from app.nn.training import EpochRecord, TrainingConfig, record_epoch
from app.synth.schemas import LabeledImage

logger = logging.getLogger("app.finegrain")

COMPONENT = "finegrain"
_EVAL_BATCH = 64


@dataclass(frozen=True)
class FinegrainLoss:
    ce: Tensor
    mamc: Tensor
    total: Tensor


@dataclass(frozen=True)
class FinegrainTrainingResult:
    model: FinegrainModel
    curve: list[EpochRecord]


@dataclass(frozen=True)
class CardComparison:
    cascade_accuracy: float
    flat_accuracy: float
    count: int


def _color_indices(items: Sequence[LabeledImage]) -> np.ndarray:
    out = []
    for item in items:
        if item.label not in (ClassLabel.YELLOW_CARD, ClassLabel.RED_CARD):
            raise DatasetError(f"fine-grain data must be card images, got {item.label}", item.path)
        out.append(CARD_COLORS.index(card_color(item.label)))  # type: ignore[arg-type]
    return np.asarray(out, dtype=np.int64)


def finegrain_objective(
    model: FinegrainModel, images: Tensor, labels: np.ndarray, lambda_mamc: float
) -> FinegrainLoss:
    """Cross-entropy on the head plus lambda_mamc times the attention constraint."""
    attention = model.attend(images)
    ce = F.softmax_cross_entropy(model.head_logits(attention), labels)
    mamc = mamc_loss(attention, labels)
    total = ce + mamc * lambda_mamc if lambda_mamc else ce
    return FinegrainLoss(ce=ce, mamc=mamc, total=total)


def card_probs(model: FinegrainModel, batch: np.ndarray) -> np.ndarray:
    previous = model.mode
    model.eval()
    try:
        rows = []
        for start in range(0, batch.shape[0], _EVAL_BATCH):
            x = Tensor(batch[start : start + _EVAL_BATCH].astype(model.dtype, copy=False))
            logits = model.head_logits(model.attend(x))
            rows.append(F.softmax(logits.data.astype(np.float64)))
    finally:
        model.mode = previous
    return np.concatenate(rows) if rows else np.zeros((0, len(CARD_COLORS)))


def train_finegrain(
    train: Sequence[LabeledImage],
    val: Sequence[LabeledImage],
    *,
    config: FinegrainConfig | None = None,
    training: TrainingConfig | None = None,
) -> FinegrainTrainingResult:
    config = config or FinegrainConfig()
    training = training or TrainingConfig()
    y_train = _color_indices(train)
    y_val = _color_indices(val)
    for i, color in enumerate(CARD_COLORS):
        if np.sum(y_train == i) < 2:
            raise DatasetError(f"fine-grain training needs at least two {color} card images")
    x_train = to_batch([item.image for item in train], config.input_size, training.dtype)
    x_val = to_batch([item.image for item in val], config.input_size, training.dtype)

    model = build_finegrain(config, seed=training.seed, dtype=training.dtype)
    optimizer = Adam(model.parameters(), lr=training.lr)
    order_rng = np.random.default_rng(np.random.SeedSequence([training.seed, 1]))
    aug_rng = np.random.default_rng(np.random.SeedSequence([training.seed, 3]))

    curve: list[EpochRecord] = []
    for epoch in range(1, training.epochs + 1):
        model.train()
        losses: list[float] = []
        for idx in paired_minibatches(y_train, training.batch_size, order_rng):
            images = [
                augment(train[i].image, train[i].label, aug_rng, config.augmentation) for i in idx
            ]
            x = Tensor(to_batch(images, config.input_size, training.dtype))
            optimizer.zero_grad()
            loss = finegrain_objective(model, x, y_train[idx], config.lambda_mamc)
            loss.total.backward()
            optimizer.step()
            losses.append(loss.total.item())
        val_accuracy = None
        if len(y_val):
            val_accuracy = float(np.mean(card_probs(model, x_val).argmax(axis=1) == y_val))
        train_accuracy = float(np.mean(card_probs(model, x_train).argmax(axis=1) == y_train))
        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            train_accuracy=train_accuracy,
            val_accuracy=val_accuracy,
        )
        record_epoch(COMPONENT, record)
        curve.append(record)

    model.eval()
    return FinegrainTrainingResult(model=model, curve=curve)


def _verdict(row: np.ndarray) -> CardVerdict:
    top = int(np.argmax(row))
    return CardVerdict(color=CARD_COLORS[top], confidence=float(row[top]))


def classify_cards(images: Sequence[np.ndarray], model: FinegrainModel) -> list[CardVerdict]:
    rows = card_probs(model, to_batch(images, model.config.input_size))
    return [_verdict(row) for row in rows]


def classify_card(image: np.ndarray, model: FinegrainModel) -> CardVerdict:
    return classify_cards([image], model)[0]


def compare_card_accuracy(
    cards: Sequence[LabeledImage],
    *,
    merged: ClassifierModel,
    finegrain: FinegrainModel,
    flat: ClassifierModel,
) -> CardComparison:
    """Card accuracy of (9-class + fine-grain) against the flat 10-class baseline.

    A card counts for the cascade when the 9-class model says Card and the fine-grain
    module names the right color; for the baseline when its top class is the right card.
    """
    if not cards:
        raise DatasetError("card comparison needs at least one card image")
    truth = [item.label for item in cards]
    _color_indices(cards)
    images = [item.image for item in cards]

    merged_probs = predict_probs(merged, to_batch(images, merged.config.input_size))
    merged_top = [merged.config.classes[i] for i in merged_probs.argmax(axis=1)]
    colors = classify_cards(images, finegrain)
    cascade_hits = sum(
        top is NineClassView.CARD and v.color is card_color(t)  # type: ignore[arg-type]
        for top, v, t in zip(merged_top, colors, truth, strict=True)
    )

    flat_probs = predict_probs(flat, to_batch(images, flat.config.input_size))
    flat_top = [flat.config.classes[i] for i in flat_probs.argmax(axis=1)]
    flat_hits = sum(top is t for top, t in zip(flat_top, truth, strict=True))

    result = CardComparison(
        cascade_accuracy=cascade_hits / len(cards),
        flat_accuracy=flat_hits / len(cards),
        count=len(cards),
    )
    logger.info(
        "card accuracy compared",
        extra={"component": COMPONENT, "accuracy": result.cascade_accuracy},
    )
    return result


def write_card_report_csv(
    path: str | Path,
    image_ids: Sequence[str],
    verdicts: Sequence[CardVerdict],
    truth: Sequence[CardColor | None] | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = truth if truth is not None else [None] * len(verdicts)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "color", "confidence", "truth"])
        for image_id, verdict, t in zip(image_ids, verdicts, labels, strict=True):
            writer.writerow([image_id, verdict.color, f"{verdict.confidence:.6f}", t or ""])
    return path


def save_finegrain(model: FinegrainModel, path: str | Path) -> Path:
    return save_checkpoint(model, path, component=COMPONENT, config=model.config)


def load_finegrain(path: str | Path) -> FinegrainModel:
    manifest, arrays = read_checkpoint(path)
    if manifest.component != COMPONENT:
        raise CheckpointError(f"checkpoint holds a {manifest.component} model", str(path))
    model = build_finegrain(FinegrainConfig.model_validate(manifest.config))
    load_into(model, manifest, arrays)
    model.eval()
    return model
