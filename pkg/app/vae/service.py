from __future__ import annotations

import csv
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from app.classifier.labels import EVENT_CLASSES
from app.domain.exceptions import CheckpointError, ConfigValidationError, DatasetError
from app.nn.checkpoint import load_into, read_checkpoint, save_checkpoint
from app.nn.data import minibatches, to_batch
from app.nn.optim import Adam
from app.nn.tensor import Tensor
from app.nn.training import EpochRecord, TrainingConfig, record_epoch
from app.synth.schemas import LabeledImage
from app.vae.model import VaeModel, build_vae, elbo_loss
from app.vae.schemas import CalibrationReport, GateDecision, VaeConfig

logger = logging.getLogger("app.vae")

COMPONENT = "vae"
_EVAL_BATCH = 64


@dataclass(frozen=True)
class VaeTrainingResult:
    model: VaeModel
    curve: list[EpochRecord]


def _event_batch(images: Sequence[LabeledImage], size: int, dtype: str) -> np.ndarray:
    for item in images:
        if item.label not in EVENT_CLASSES:
            raise DatasetError(f"VAE trains on event classes only, got {item.label}", item.path)
    return to_batch([item.image for item in images], size, dtype)


def image_losses(model: VaeModel, batch: np.ndarray) -> np.ndarray:
    """Deterministic per-image loss (z = mu, infer mode) for a B x 3 x S x S batch."""
    previous = model.mode
    model.eval()
    try:
        out = []
        for start in range(0, batch.shape[0], _EVAL_BATCH):
            x = Tensor(batch[start : start + _EVAL_BATCH].astype(model.dtype, copy=False))
            recon, code = model.reconstruct(x)
            out.append(elbo_loss(x, recon, code).total.data.astype(np.float64))
    finally:
        model.mode = previous
    return np.concatenate(out) if out else np.zeros(0)


def train_vae(
    train: Sequence[LabeledImage],
    val: Sequence[LabeledImage],
    *,
    config: VaeConfig | None = None,
    training: TrainingConfig | None = None,
) -> VaeTrainingResult:
    """Adam on the mean per-image negative ELBO; the curve holds one record per epoch."""
    config = config or VaeConfig()
    training = training or TrainingConfig()
    if not train:
        raise DatasetError("VAE training set is empty")
    x_train = _event_batch(train, config.input_size, training.dtype)
    x_val = _event_batch(val, config.input_size, training.dtype)

    model = build_vae(config, seed=training.seed, dtype=training.dtype)
    optimizer = Adam(model.parameters(), lr=training.lr)
    order_rng = np.random.default_rng(np.random.SeedSequence([training.seed, 1]))
    noise_rng = np.random.default_rng(np.random.SeedSequence([training.seed, 2]))

    curve: list[EpochRecord] = []
    for epoch in range(1, training.epochs + 1):
        model.train()
        batch_losses: list[float] = []
        for idx in minibatches(len(x_train), training.batch_size, order_rng):
            x = Tensor(x_train[idx])
            noise = Tensor(
                noise_rng.standard_normal((len(idx), config.latent_dim)).astype(training.dtype)
            )
            optimizer.zero_grad()
            recon, code = model.reconstruct(x, noise)
            loss = elbo_loss(x, recon, code).total.mean()
            loss.backward()
            optimizer.step()
            batch_losses.append(loss.item())
        val_loss = float(image_losses(model, x_val).mean()) if len(x_val) else None
        record = EpochRecord(
            epoch=epoch, train_loss=float(np.mean(batch_losses)), val_loss=val_loss
        )
        record_epoch(COMPONENT, record)
        curve.append(record)

    model.eval()
    return VaeTrainingResult(model=model, curve=curve)


def gate(image: np.ndarray, model: VaeModel, loss_threshold: float | None = None) -> GateDecision:
    """Accept an H x W x 3 image iff its deterministic loss is <= the threshold."""
    threshold = model.config.loss_threshold if loss_threshold is None else loss_threshold
    if threshold is None:
        raise ConfigValidationError("VAE gate needs a calibrated loss_threshold")
    loss = float(image_losses(model, to_batch([image], model.config.input_size))[0])
    return GateDecision(accepted=loss <= threshold, loss=loss)


def balanced_accuracy(in_losses: np.ndarray, out_losses: np.ndarray, threshold: float) -> float:
    accept_in = float(np.mean(in_losses <= threshold))
    reject_out = float(np.mean(out_losses > threshold))
    return 0.5 * (accept_in + reject_out)


def calibrate_threshold(
    in_losses: Sequence[float] | np.ndarray, out_losses: Sequence[float] | np.ndarray
) -> CalibrationReport:
    """Threshold maximizing balanced accuracy between the two loss samples.

    Candidates are the midpoints between consecutive distinct pooled losses plus one
    value below and one above every sample; the first best candidate wins.
    """
    ins = np.asarray(in_losses, dtype=np.float64)
    outs = np.asarray(out_losses, dtype=np.float64)
    if ins.size == 0 or outs.size == 0:
        raise DatasetError("calibration needs in- and out-of-distribution losses")
    pooled = np.unique(np.concatenate([ins, outs]))
    lowest, highest = float(pooled[0]), float(pooled[-1])
    below = lowest / 2.0 if lowest > 0 else lowest - 1.0
    above = highest + max(highest - lowest, 1.0)
    candidates = np.concatenate([[below], (pooled[:-1] + pooled[1:]) / 2.0, [above]])
    scores = [balanced_accuracy(ins, outs, float(t)) for t in candidates]
    best = int(np.argmax(scores))
    report = CalibrationReport(
        threshold=float(candidates[best]),
        balanced_accuracy=float(scores[best]),
        in_distribution_count=int(ins.size),
        out_distribution_count=int(outs.size),
    )
    logger.info(
        "vae threshold calibrated",
        extra={
            "component": COMPONENT,
            "threshold": report.threshold,
            "accuracy": report.balanced_accuracy,
        },
    )
    return report


def write_loss_histogram(
    path: str | Path,
    in_losses: np.ndarray,
    out_losses: np.ndarray,
    *,
    bins: int = 30,
    threshold: float | None = None,
) -> Path:
    """CSV of both loss histograms on shared bins, for plotting the separation."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    edges = np.histogram_bin_edges(np.concatenate([in_losses, out_losses]), bins=bins)
    in_counts, _ = np.histogram(in_losses, bins=edges)
    out_counts, _ = np.histogram(out_losses, bins=edges)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["bin_left", "bin_right", "in_distribution", "out_distribution", "threshold"]
        )
        for i in range(bins):
            writer.writerow(
                [
                    f"{edges[i]:.6f}",
                    f"{edges[i + 1]:.6f}",
                    int(in_counts[i]),
                    int(out_counts[i]),
                    "" if threshold is None else f"{threshold:.6f}",
                ]
            )
    return path


def save_vae(model: VaeModel, path: str | Path) -> Path:
    return save_checkpoint(model, path, component=COMPONENT, config=model.config)


def load_vae(path: str | Path) -> VaeModel:
    manifest, arrays = read_checkpoint(path)
    if manifest.component != COMPONENT:
        raise CheckpointError(f"checkpoint holds a {manifest.component} model", str(path))
    config = VaeConfig.model_validate(manifest.config)
    model = build_vae(config)
    load_into(model, manifest, arrays)
    model.eval()
    return model


def with_threshold(model: VaeModel, threshold: float) -> VaeModel:
    """Attach a calibrated threshold to the model's config."""
    model.config = VaeConfig.model_validate(
        {**model.config.model_dump(), "loss_threshold": threshold}
    )
    return model
