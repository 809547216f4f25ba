from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.classifier.backbone import SmallCnnBackbone
from app.classifier.labels import CARD_COLORS, CardColor
from app.classifier.schemas import AugmentationConfig
from app.domain.exceptions import ShapeMismatchError
from app.finegrain.osme import AttentionFeatures, osme_forward, osme_params
from app.nn import functional as F
from app.nn.layers import Module, dense_params
from app.nn.tensor import Tensor, concat


class FinegrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    input_size: int = Field(default=64, ge=16)
    channels: list[int] = Field(default_factory=lambda: [8, 16, 32, 32], min_length=1)
    branches: int = Field(default=2, ge=2, description="Attention branches P.")
    feature_dim: int = Field(default=64, ge=1, description="Attention feature width D.")
    reduction: int = Field(default=4, ge=1)
    lambda_mamc: float = Field(default=0.5, ge=0.0)
    augmentation: AugmentationConfig = Field(
        default_factory=lambda: AugmentationConfig(rotate_deg=5.0, scale=0.05, shift=0.05)
    )

    @model_validator(mode="after")
    def _check_plan(self) -> FinegrainConfig:
        if self.input_size % (2 ** len(self.channels)):
            raise ValueError(f"input_size must be divisible by {2 ** len(self.channels)}")
        return self


@dataclass(frozen=True)
class CardVerdict:
    color: CardColor
    confidence: float


class FinegrainModel(Module):
    """Backbone feature map -> OSME branches -> concatenated features -> 2-way head."""

    def __init__(self, config: FinegrainConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        self.backbone = SmallCnnBackbone(config.channels)
        self.backbone.build(self.layers, rng)
        self.layers.update(
            osme_params(
                rng,
                self.backbone.out_channels,
                branches=config.branches,
                feature_dim=config.feature_dim,
                reduction=config.reduction,
            )
        )
        self.layers["head"] = dense_params(
            rng, config.branches * config.feature_dim, len(CARD_COLORS), scale=0.1
        )

    def attend(self, images: Tensor) -> AttentionFeatures:
        s = self.config.input_size
        if images.ndim != 4 or images.shape[1:] != (3, s, s):
            raise ShapeMismatchError("finegrain", f"(B, 3, {s}, {s})", images.shape)
        return osme_forward(self.backbone.feature_map(self.layers, images, self.mode), self.layers)

    def head_logits(self, attention: AttentionFeatures) -> Tensor:
        return F.dense(concat(attention.features, axis=1), self.layers["head"])


def build_finegrain(
    config: FinegrainConfig, *, seed: int = 0, dtype: str = "float64"
) -> FinegrainModel:
    model = FinegrainModel(config, np.random.default_rng(seed))
    if dtype != "float64":
        model.astype(dtype)
    return model
