from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.classifier.labels import ClassLabel, PoolLabel

Split = Literal["train", "val", "test"]
SPLITS: tuple[Split, ...] = ("train", "val", "test")

RGB = tuple[int, int, int]


class SplitCounts(BaseModel):
    model_config = ConfigDict(extra="forbid")

    train: int = Field(default=40, gt=0)
    val: int = Field(default=10, gt=0)
    test: int = Field(default=10, gt=0)

    def for_split(self, split: Split) -> int:
        return int(getattr(self, split))


class SynthSpec(BaseModel):
    """Everything needed to regenerate a synthetic dataset byte for byte."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)
    image_size: int = Field(default=64, ge=16, description="Square image side in pixels.")
    class_counts: SplitCounts = Field(default_factory=SplitCounts)
    pool_counts: SplitCounts = Field(
        default_factory=lambda: SplitCounts(train=20, val=20, test=20),
        description="Per-split counts of the other-soccer and non-soccer pools.",
    )
    card_patch_size: tuple[float, float] = Field(
        default=(0.10, 0.14),
        description="Card patch (width, height) as a fraction of the image side.",
    )
    yellow_rgb: RGB = (240, 215, 30)
    red_rgb: RGB = (215, 30, 30)
    noise_level: float = Field(default=0.03, ge=0.0, le=0.5)

    @model_validator(mode="after")
    def _check_patch(self) -> SynthSpec:
        w, h = self.card_patch_size
        if not (0 < w < 1 and 0 < h < 1):
            raise ValueError("card_patch_size fractions must lie in (0, 1)")
        if w * h > 0.04:
            raise ValueError("card patch must cover at most 4% of the image")
        if self.yellow_rgb == self.red_rgb:
            raise ValueError("yellow and red card colors must differ")
        return self


DatasetLabel = ClassLabel | PoolLabel


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: DatasetLabel
    split: Split


@dataclass(frozen=True)
class LabeledImage:
    """H x W x 3 image normalized to [0, 1] with its label."""

    image: np.ndarray
    label: DatasetLabel
    path: str


class PlantedEvent(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: ClassLabel
    frame_index: int = Field(ge=0)


@dataclass(frozen=True)
class PlantedMatch:
    frames_dir: str
    length: int
    ground_truth: list[PlantedEvent]
