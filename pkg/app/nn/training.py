"""Pieces shared by the three independent trainers: hyperparameters, epoch records, curves."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from app.core.metrics import training_epochs_total, training_loss

logger = logging.getLogger("app.nn")


class TrainingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=16, ge=2)
    lr: float = Field(default=1e-3, gt=0.0)
    seed: int = Field(default=0, ge=0)
    dtype: Literal["float32", "float64"] = "float32"


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float | None = None
    train_accuracy: float | None = None
    val_accuracy: float | None = None


def record_epoch(component: str, record: EpochRecord) -> None:
    """Log one finished epoch and publish it to the training metrics."""
    training_epochs_total.labels(component=component).inc()
    training_loss.labels(component=component).set(record.train_loss)
    logger.info(
        "epoch finished",
        extra={
            "component": component,
            "epoch": record.epoch,
            "loss": round(record.train_loss, 6),
            "accuracy": None if record.val_accuracy is None else round(record.val_accuracy, 6),
        },
    )


def write_curve_csv(path: str | Path, curve: list[EpochRecord]) -> Path:
    """Plot-ready CSV with one row per epoch."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = list(EpochRecord.__dataclass_fields__)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for record in curve:
            row = {k: ("" if v is None else v) for k, v in asdict(record).items()}
            writer.writerow(row)
    return path
