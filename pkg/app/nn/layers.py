from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__
from typing import Literal

import numpy as np

from app.domain.exceptions import ConfigValidationError, ShapeMismatchError
from app.nn.tensor import Tensor

Padding = Literal["same", "valid"]
Mode = Literal["train", "infer"]


class LayerKind(StrEnum):
    CONV = "Conv"
    CONV_TRANSPOSE = "ConvTranspose"
    DENSE = "Dense"
    BATCH_NORM = "BatchNorm"


@dataclass(frozen=True)
class LayerHyper:
    in_channels: int
    out_channels: int
    kernel_size: int = 1
    stride: int = 1
    padding: Padding = "same"
    momentum: float = 0.1
    eps: float = 1e-5


@dataclass
class LayerParams:
    """Weights and hyperparameters of one layer.

    Weight layouts:
      Conv           (out, in, k, k)
      ConvTranspose  (in, out, k, k)   same kernel as the Conv it is the adjoint of
      Dense          (out, in)
      BatchNorm      (channels,)       weights = scale, bias = shift
    """

    kind: LayerKind
    weights: Tensor
    bias: Tensor
    hyper: LayerHyper
    running_mean: Tensor | None = None
    running_var: Tensor | None = None

    def expected_weight_shape(self) -> tuple[int, ...]:
        h = self.hyper
        if self.kind is LayerKind.CONV:
            return (h.out_channels, h.in_channels, h.kernel_size, h.kernel_size)
        if self.kind is LayerKind.CONV_TRANSPOSE:
            return (h.in_channels, h.out_channels, h.kernel_size, h.kernel_size)
        if self.kind is LayerKind.DENSE:
            return (h.out_channels, h.in_channels)
        return (h.out_channels,)

    def validate(self) -> None:
        expected = self.expected_weight_shape()
        if self.weights.shape != expected:
            raise ShapeMismatchError(f"{self.kind} weights", expected, self.weights.shape)
        bias_shape = (self.hyper.out_channels,)
        if self.bias.shape != bias_shape:
            raise ShapeMismatchError(f"{self.kind} bias", bias_shape, self.bias.shape)
        if self.kind is LayerKind.BATCH_NORM:
            if self.running_mean is None or self.running_var is None:
                raise ShapeMismatchError("BatchNorm running stats", expected, (0,))
            for stat in (self.running_mean, self.running_var):
                if stat.shape != expected:
                    raise ShapeMismatchError("BatchNorm running stats", expected, stat.shape)
            if not np.all(self.running_var.data > 0):
                raise ConfigValidationError("BatchNorm running_var must be strictly positive")

    def trainable(self) -> list[Tensor]:
        return [self.weights, self.bias]

    def astype(self, dtype: np.dtype | str) -> None:
        self.weights = Tensor(self.weights.data.astype(dtype), requires_grad=True)
        self.bias = Tensor(self.bias.data.astype(dtype), requires_grad=True)
        if self.running_mean is not None and self.running_var is not None:
            self.running_mean = Tensor(self.running_mean.data.astype(dtype))
            self.running_var = Tensor(self.running_var.data.astype(dtype))


def _he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> Tensor:
    limit = np.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-limit, limit, size=shape).astype(dtype), requires_grad=True)


def _zeros(n: int, dtype) -> Tensor:
    return Tensor(np.zeros(n, dtype=dtype), requires_grad=True)


def conv_params(
    rng: np.random.Generator,
    in_channels: int,
    out_channels: int,
    kernel_size: int = 3,
    *,
    stride: int = 1,
    padding: Padding = "same",
    dtype: str = "float64",
) -> LayerParams:
    hyper = LayerHyper(in_channels, out_channels, kernel_size, stride, padding)
    fan_in = in_channels * kernel_size * kernel_size
    shape = (out_channels, in_channels, kernel_size, kernel_size)
    params = LayerParams(
        LayerKind.CONV, _he_uniform(rng, shape, fan_in, dtype), _zeros(out_channels, dtype), hyper
    )
    params.validate()
    return params


def conv_transpose_params(
    rng: np.random.Generator,
    in_channels: int,
    out_channels: int,
    kernel_size: int = 3,
    *,
    stride: int = 1,
    padding: Padding = "same",
    dtype: str = "float64",
) -> LayerParams:
    hyper = LayerHyper(in_channels, out_channels, kernel_size, stride, padding)
    # Each output pixel sums in_channels * k * k taps (stride 1).
    fan_in = in_channels * kernel_size * kernel_size
    shape = (in_channels, out_channels, kernel_size, kernel_size)
    params = LayerParams(
        LayerKind.CONV_TRANSPOSE,
        _he_uniform(rng, shape, fan_in, dtype),
        _zeros(out_channels, dtype),
        hyper,
    )
    params.validate()
    return params


def dense_params(
    rng: np.random.Generator,
    in_features: int,
    out_features: int,
    *,
    scale: float = 1.0,
    dtype: str = "float64",
) -> LayerParams:
    hyper = LayerHyper(in_features, out_features)
    weights = _he_uniform(rng, (out_features, in_features), in_features, dtype)
    if scale != 1.0:
        weights = Tensor(weights.data * scale, requires_grad=True)
    params = LayerParams(LayerKind.DENSE, weights, _zeros(out_features, dtype), hyper)
    params.validate()
    return params


def batchnorm_params(
    channels: int, *, momentum: float = 0.1, eps: float = 1e-5, dtype: str = "float64"
) -> LayerParams:
    hyper = LayerHyper(channels, channels, momentum=momentum, eps=eps)
    params = LayerParams(
        LayerKind.BATCH_NORM,
        Tensor(np.ones(channels, dtype=dtype), requires_grad=True),
        _zeros(channels, dtype),
        hyper,
        running_mean=Tensor(np.zeros(channels, dtype=dtype)),
        running_var=Tensor(np.ones(channels, dtype=dtype)),
    )
    params.validate()
    return params


class Module:
    """A named, ordered collection of layers plus a train/infer switch.

    Subclasses register layers in `layers` in forward order; that order is also the
    checkpoint order.
    """

    def __init__(self) -> None:
        self.layers: dict[str, LayerParams] = {}
        self.mode: Mode = "train"

    def named_layers(self) -> Iterator[tuple[str, LayerParams]]:
        yield from self.layers.items()

    def parameters(self) -> list[Tensor]:
        return [t for _, layer in self.named_layers() for t in layer.trainable()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def train(self) -> Module:
        self.mode = "train"
        return self

    def eval(self) -> Module:
        self.mode = "infer"
        return self

    def astype(self, dtype: np.dtype | str) -> Module:
        for _, layer in self.named_layers():
            layer.astype(dtype)
        return self

    @property
    def dtype(self) -> np.dtype:
        first = next(iter(self.layers.values()))
        return first.weights.dtype
