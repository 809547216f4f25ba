"""One-squeeze multi-excitation attention.

One squeeze (global average pool) feeds P excitation branches. Each branch gates the
channels of the feature map with its own sigmoid mask and projects the re-pooled,
gated map to a D-wide attention feature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.domain.exceptions import ShapeMismatchError
from app.nn import functional as F
from app.nn.layers import LayerParams, dense_params
from app.nn.tensor import Tensor


@dataclass(frozen=True)
class AttentionFeatures:
    features: list[Tensor]  # P tensors of shape (B, D)
    masks: list[Tensor]  # P tensors of shape (B, C), entries in (0, 1)

    @property
    def branches(self) -> int:
        return len(self.features)


def osme_params(
    rng: np.random.Generator,
    channels: int,
    *,
    branches: int = 2,
    feature_dim: int = 64,
    reduction: int = 4,
    prefix: str = "osme",
) -> dict[str, LayerParams]:
    if branches < 2:
        raise ShapeMismatchError("osme", "at least 2 branches", (branches,))
    hidden = max(1, channels // reduction)
    layers: dict[str, LayerParams] = {}
    for p in range(branches):
        layers[f"{prefix}{p}_fc1"] = dense_params(rng, channels, hidden)
        layers[f"{prefix}{p}_fc2"] = dense_params(rng, hidden, channels)
        layers[f"{prefix}{p}_proj"] = dense_params(rng, channels, feature_dim)
    return layers


def branch_count(layers: dict[str, LayerParams], prefix: str = "osme") -> int:
    return sum(1 for name in layers if name.startswith(prefix) and name.endswith("_fc1"))


def osme_forward(
    feature_map: Tensor, layers: dict[str, LayerParams], *, prefix: str = "osme"
) -> AttentionFeatures:
    if feature_map.ndim != 4:
        raise ShapeMismatchError("osme_forward", "rank 4", feature_map.shape)
    b, c = feature_map.shape[:2]
    squeeze = F.global_avg_pool(feature_map)
    features: list[Tensor] = []
    masks: list[Tensor] = []
    for p in range(branch_count(layers, prefix)):
        fc1 = layers[f"{prefix}{p}_fc1"]
        if fc1.hyper.in_channels != c:
            raise ShapeMismatchError("osme_forward", (b, fc1.hyper.in_channels), (b, c))
        excited = F.activation(F.dense(squeeze, fc1), "relu")
        mask = F.activation(F.dense(excited, layers[f"{prefix}{p}_fc2"]), "sigmoid")
        attended = feature_map * mask.reshape(b, c, 1, 1)
        features.append(F.dense(F.global_avg_pool(attended), layers[f"{prefix}{p}_proj"]))
        masks.append(mask)
    return AttentionFeatures(features=features, masks=masks)
