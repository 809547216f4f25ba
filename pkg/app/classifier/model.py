from __future__ import annotations

import numpy as np

from app.classifier.backbone import SmallCnnBackbone
from app.classifier.schemas import ClassifierConfig
from app.domain.exceptions import ShapeMismatchError
from app.nn import functional as F
from app.nn.layers import Module, dense_params
from app.nn.tensor import Tensor


class ClassifierModel(Module):
    """Small CNN backbone, global average pool and a dense head over the label space."""

    def __init__(self, config: ClassifierConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        self.backbone = SmallCnnBackbone(config.channels)
        self.backbone.build(self.layers, rng)
        self.layers["head"] = dense_params(
            rng, self.backbone.out_channels, config.num_classes, scale=config.head_init_scale
        )

    def logits(self, images: Tensor) -> Tensor:
        s = self.config.input_size
        if images.ndim != 4 or images.shape[1:] != (3, s, s):
            raise ShapeMismatchError("classifier", f"(B, 3, {s}, {s})", images.shape)
        features = F.global_avg_pool(self.backbone.feature_map(self.layers, images, self.mode))
        return F.dense(features, self.layers["head"])

    def forward(self, images: Tensor) -> Tensor:
        """Row probabilities, B x num_classes."""
        return F.activation(self.logits(images), "softmax_rows")


def build_classifier(
    config: ClassifierConfig, *, seed: int = 0, dtype: str = "float64"
) -> ClassifierModel:
    model = ClassifierModel(config, np.random.default_rng(seed))
    if dtype != "float64":
        model.astype(dtype)
    return model
