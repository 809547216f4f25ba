from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.classifier.labels import NINE_CLASSES, TEN_CLASSES, ClassLabel, NineClassView

LabelSpace = Literal["nine", "ten"]


class AugmentationConfig(BaseModel):
    """Per-sample random affine jitter applied during training only."""

    model_config = ConfigDict(extra="forbid")

    scale: float = Field(default=0.10, ge=0.0, lt=1.0, description="Max relative zoom change.")
    rotate_deg: float = Field(default=10.0, ge=0.0, le=180.0)
    shift: float = Field(default=0.10, ge=0.0, lt=1.0, description="Max shift, fraction of side.")
    flip_p: float = Field(default=0.5, ge=0.0, le=1.0)
    flip_scene_sides: bool = Field(
        default=False,
        description="Allow horizontal flips of Left/RightPenaltyArea (a flip swaps their meaning).",
    )
    enabled: bool = True


class ClassifierConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    input_size: int = Field(default=64, ge=16)
    channels: list[int] = Field(default_factory=lambda: [8, 16, 32, 32], min_length=1)
    label_space: LabelSpace = Field(
        default="nine",
        description="'nine' merges the two cards; 'ten' is the flat baseline.",
    )
    head_init_scale: float = Field(default=0.01, gt=0.0)
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)

    @model_validator(mode="after")
    def _check_plan(self) -> ClassifierConfig:
        if any(c < 1 for c in self.channels):
            raise ValueError("channel widths must be positive")
        if self.input_size % (2 ** len(self.channels)):
            raise ValueError(
                f"input_size must be divisible by {2 ** len(self.channels)} "
                f"for {len(self.channels)} pooling stages"
            )
        return self

    @property
    def classes(self) -> tuple[NineClassView, ...] | tuple[ClassLabel, ...]:
        return NINE_CLASSES if self.label_space == "nine" else TEN_CLASSES

    @property
    def num_classes(self) -> int:
        return len(self.classes)


class ClassifierOutput(BaseModel):
    """Softmax output over the model's label space."""

    model_config = ConfigDict(frozen=True)

    probs: tuple[float, ...]
    top_class: NineClassView | ClassLabel
    top_prob: float = Field(ge=0.0, le=1.0)
