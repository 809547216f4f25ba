"""Convolutional feature extractors.

A backbone owns a name prefix inside its host module's layer table, so the host's
checkpoint holds backbone and head weights side by side. Anything that satisfies
`Backbone` can be swapped in (for example externally trained weights with a matching plan).
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from app.nn import functional as F
from app.nn.layers import LayerParams, Mode, batchnorm_params, conv_params
from app.nn.tensor import Tensor


class Backbone(Protocol):
    out_channels: int

    def build(self, layers: dict[str, LayerParams], rng: np.random.Generator) -> None: ...

    def feature_map(self, layers: dict[str, LayerParams], x: Tensor, mode: Mode) -> Tensor: ...


class SmallCnnBackbone:
    """(conv 3x3 + batchnorm + relu + maxpool) per stage; spatial size halves per stage."""

    def __init__(self, channels: list[int], *, prefix: str = "bb", in_channels: int = 3):
        self.channels = list(channels)
        self.prefix = prefix
        self.in_channels = in_channels
        self.out_channels = self.channels[-1]

    def build(self, layers: dict[str, LayerParams], rng: np.random.Generator) -> None:
        widths = [self.in_channels, *self.channels]
        for i in range(len(self.channels)):
            layers[f"{self.prefix}{i}_conv"] = conv_params(rng, widths[i], widths[i + 1])
            layers[f"{self.prefix}{i}_bn"] = batchnorm_params(widths[i + 1])

    def feature_map(self, layers: dict[str, LayerParams], x: Tensor, mode: Mode) -> Tensor:
        h = x
        for i in range(len(self.channels)):
            h = F.conv2d(h, layers[f"{self.prefix}{i}_conv"])
            h = F.batchnorm(h, layers[f"{self.prefix}{i}_bn"], mode)
            h = F.maxpool2(F.activation(h, "relu"))
        return h
