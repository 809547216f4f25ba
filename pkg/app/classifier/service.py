from __future__ import annotations

import csv
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from app.classifier.augment import augment
from app.classifier.labels import ClassLabel, NineClassView, merge_card_labels
from app.classifier.model import ClassifierModel, build_classifier
from app.classifier.schemas import ClassifierConfig, ClassifierOutput
from app.domain.exceptions import CheckpointError, ConfigValidationError, DatasetError
from app.nn import functional as F
from app.nn.checkpoint import load_into, read_checkpoint, save_checkpoint
from app.nn.data import minibatches, to_batch
from app.nn.optim import Adam
from app.nn.tensor import Tensor
from app.nn.training import EpochRecord, TrainingConfig, record_epoch
from app.synth.schemas import LabeledImage

logger = logging.getLogger("app.classifier")

COMPONENT = "classifier"
_EVAL_BATCH = 64


@dataclass(frozen=True)
class ClassifierTrainingResult:
    model: ClassifierModel
    curve: list[EpochRecord]


def to_label_space(label: ClassLabel, config: ClassifierConfig) -> NineClassView | ClassLabel:
    return merge_card_labels(label) if config.label_space == "nine" else label


def _label_indices(items: Sequence[LabeledImage], config: ClassifierConfig) -> np.ndarray:
    classes = list(config.classes)
    out = []
    for item in items:
        if not isinstance(item.label, ClassLabel):
            raise DatasetError(f"{item.label} images cannot train the classifier", item.path)
        out.append(classes.index(to_label_space(item.label, config)))
    return np.asarray(out, dtype=np.int64)


def predict_probs(model: ClassifierModel, batch: np.ndarray) -> np.ndarray:
    """Infer-mode probabilities for a B x 3 x S x S batch, as float64."""
    previous = model.mode
    model.eval()
    try:
        rows = []
        for start in range(0, batch.shape[0], _EVAL_BATCH):
            x = Tensor(batch[start : start + _EVAL_BATCH].astype(model.dtype, copy=False))
            rows.append(F.softmax(model.logits(x).data.astype(np.float64)))
    finally:
        model.mode = previous
    return np.concatenate(rows) if rows else np.zeros((0, model.config.num_classes))


def to_output(probs: np.ndarray, config: ClassifierConfig) -> ClassifierOutput:
    top = int(np.argmax(probs))
    return ClassifierOutput(
        probs=tuple(float(p) for p in probs),
        top_class=config.classes[top],
        top_prob=float(probs[top]),
    )


def classify(images: Sequence[np.ndarray], model: ClassifierModel) -> list[ClassifierOutput]:
    probs = predict_probs(model, to_batch(images, model.config.input_size))
    return [to_output(row, model.config) for row in probs]


def apply_threshold(output: ClassifierOutput, tau: float) -> ClassifierOutput | None:
    """Keep the output only when its top probability is strictly above `tau`."""
    if not 0.0 <= tau < 1.0:
        raise ConfigValidationError(f"softmax threshold must lie in [0, 1), got {tau}")
    return output if output.top_prob > tau else None


def classify_with_threshold(
    image: np.ndarray, model: ClassifierModel, tau: float
) -> ClassifierOutput | None:
    return apply_threshold(classify([image], model)[0], tau)


def accuracy_on(model: ClassifierModel, batch: np.ndarray, labels: np.ndarray) -> float | None:
    if len(labels) == 0:
        return None
    return float(np.mean(predict_probs(model, batch).argmax(axis=1) == labels))


def train_classifier(
    train: Sequence[LabeledImage],
    val: Sequence[LabeledImage],
    *,
    config: ClassifierConfig | None = None,
    training: TrainingConfig | None = None,
) -> ClassifierTrainingResult:
    """Cross-entropy training with per-sample augmentation; one curve record per epoch."""
    config = config or ClassifierConfig()
    training = training or TrainingConfig()
    if not train:
        raise DatasetError("classifier training set is empty")
    y_train = _label_indices(train, config)
    y_val = _label_indices(val, config)
    missing = [str(c) for i, c in enumerate(config.classes) if not np.any(y_train == i)]
    if missing:
        raise DatasetError(f"classes absent from the training set: {', '.join(missing)}")
    x_val = to_batch([item.image for item in val], config.input_size, training.dtype)

    model = build_classifier(config, seed=training.seed, dtype=training.dtype)
    optimizer = Adam(model.parameters(), lr=training.lr)
    order_rng = np.random.default_rng(np.random.SeedSequence([training.seed, 1]))
    aug_rng = np.random.default_rng(np.random.SeedSequence([training.seed, 3]))

    curve: list[EpochRecord] = []
    for epoch in range(1, training.epochs + 1):
        model.train()
        losses: list[float] = []
        correct = 0
        for idx in minibatches(len(train), training.batch_size, order_rng):
            images = [
                augment(train[i].image, train[i].label, aug_rng, config.augmentation) for i in idx
            ]
            x = Tensor(to_batch(images, config.input_size, training.dtype))
            optimizer.zero_grad()
            logits = model.logits(x)
            loss = F.softmax_cross_entropy(logits, y_train[idx])
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
            correct += int(np.sum(logits.data.argmax(axis=1) == y_train[idx]))
        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            train_accuracy=correct / len(train),
            val_accuracy=accuracy_on(model, x_val, y_val),
        )
        record_epoch(COMPONENT if config.label_space == "nine" else "classifier_flat", record)
        curve.append(record)

    model.eval()
    return ClassifierTrainingResult(model=model, curve=curve)


def write_predictions_csv(
    path: str | Path,
    frame_ids: Sequence[str],
    outputs: Sequence[ClassifierOutput],
    *,
    tau: float,
    classes: Sequence[str],
) -> Path:
    """One row per image: id, every class probability, and the thresholded decision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_id", *classes, "decision"])
        for frame_id, out in zip(frame_ids, outputs, strict=True):
            accepted = apply_threshold(out, tau)
            decision = "rejected" if accepted is None else str(accepted.top_class)
            writer.writerow([frame_id, *(f"{p:.6f}" for p in out.probs), decision])
    return path


@dataclass(frozen=True)
class PredictionRecord:
    frame_id: str
    probs: tuple[float, ...]
    decision: str | None

    def top_index(self) -> int:
        return int(np.argmax(self.probs))


def read_predictions_csv(path: str | Path) -> tuple[list[str], list[PredictionRecord]]:
    """Inverse of `write_predictions_csv`: class names and one record per image."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetError("cannot read predictions", str(path)) from exc
    if not rows or len(rows[0]) < 3 or rows[0][0] != "frame_id" or rows[0][-1] != "decision":
        raise DatasetError("predictions file has no frame_id/decision header", str(path))
    classes = rows[0][1:-1]
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(rows[0]):
            raise DatasetError(f"malformed predictions line {lineno}", str(path))
        try:
            probs = tuple(float(p) for p in row[1:-1])
        except ValueError as exc:
            raise DatasetError(f"malformed predictions line {lineno}", str(path)) from exc
        decision = None if row[-1] == "rejected" else row[-1]
        records.append(PredictionRecord(frame_id=row[0], probs=probs, decision=decision))
    return classes, records


def save_classifier(model: ClassifierModel, path: str | Path) -> Path:
    return save_checkpoint(model, path, component=COMPONENT, config=model.config)


def load_classifier(path: str | Path) -> ClassifierModel:
    manifest, arrays = read_checkpoint(path)
    if manifest.component != COMPONENT:
        raise CheckpointError(f"checkpoint holds a {manifest.component} model", str(path))
    model = build_classifier(ClassifierConfig.model_validate(manifest.config))
    load_into(model, manifest, arrays)
    model.eval()
    return model
