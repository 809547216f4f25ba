"""Differentiable layer ops over `Tensor`.

Convolutions use im2col: sliding windows are flattened into rows so the forward
pass and both gradients are single matrix products. The transposed convolution is
implemented as the input-gradient of `conv2d`, which makes the pair adjoint by
construction.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Literal

import numpy as np

from app.domain.exceptions import LabelError, ShapeMismatchError
from app.nn.layers import LayerKind, LayerParams, Mode, Padding
from app.nn.tensor import Tensor

Activation = Literal["relu", "sigmoid", "softmax_rows"]


def _require_rank(op: str, x: Tensor, rank: int) -> None:
    if x.ndim != rank:
        raise ShapeMismatchError(op, f"rank {rank}", x.shape)


def _require_kind(op: str, params: LayerParams, kind: LayerKind) -> None:
    if params.kind is not kind:
        raise ShapeMismatchError(op, f"{kind} layer", params.weights.shape)


def _pad_amount(pad: Padding, kernel: int) -> int:
    return (kernel - 1) // 2 if pad == "same" else 0


def _im2col(xp: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """(B, C, Hp, Wp) -> (B*ho*wo, C*k*k)."""
    b, c = xp.shape[:2]
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride][:, :, :ho, :wo]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(b * ho * wo, c * k * k)


def _col2im(
    cols: np.ndarray, padded_shape: tuple[int, ...], k: int, stride: int, ho: int, wo: int
) -> np.ndarray:
    """Scatter-add (B*ho*wo, C*k*k) rows back onto a (B, C, Hp, Wp) canvas."""
    b, c = padded_shape[:2]
    blocks = cols.reshape(b, ho, wo, c, k, k)
    out = np.zeros(padded_shape, dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += blocks[
                :, :, :, :, i, j
            ].transpose(0, 3, 1, 2)
    return out


def conv2d(
    x: Tensor,
    params: LayerParams,
    stride: int | None = None,
    pad: Padding | None = None,
) -> Tensor:
    _require_rank("conv2d", x, 4)
    _require_kind("conv2d", params, LayerKind.CONV)
    stride = stride or params.hyper.stride
    pad = pad or params.hyper.padding
    w, bias = params.weights, params.bias
    out_c, in_c, k, _ = w.shape
    b, c, h, wd = x.shape
    if c != in_c:
        raise ShapeMismatchError("conv2d", (b, in_c, h, wd), x.shape)
    p = _pad_amount(pad, k)
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p)))
    ho = (h + 2 * p - k) // stride + 1
    wo = (wd + 2 * p - k) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeMismatchError("conv2d", f"spatial size >= {k - 2 * p}", x.shape)
    cols = _im2col(xp, k, stride, ho, wo)
    wmat = w.data.reshape(out_c, -1)
    out = (cols @ wmat.T + bias.data).reshape(b, ho, wo, out_c).transpose(0, 3, 1, 2)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, out_c)
        gw = (gmat.T @ cols).reshape(w.shape)
        gxp = _col2im(gmat @ wmat, xp.shape, k, stride, ho, wo)
        return gxp[:, :, p : p + h, p : p + wd], gw, gmat.sum(axis=0)

    return Tensor._from_op(np.ascontiguousarray(out), (x, w, bias), backward)


def conv_transpose2d(
    x: Tensor,
    params: LayerParams,
    stride: int | None = None,
    pad: Padding | None = None,
) -> Tensor:
    """Adjoint of `conv2d` with the same kernel: output size (H-1)*stride + k - 2*pad."""
    _require_rank("conv_transpose2d", x, 4)
    _require_kind("conv_transpose2d", params, LayerKind.CONV_TRANSPOSE)
    stride = stride or params.hyper.stride
    pad = pad or params.hyper.padding
    w, bias = params.weights, params.bias
    in_c, out_c, k, _ = w.shape
    b, c, h, wd = x.shape
    if c != in_c:
        raise ShapeMismatchError("conv_transpose2d", (b, in_c, h, wd), x.shape)
    p = _pad_amount(pad, k)
    hp, wp = (h - 1) * stride + k, (wd - 1) * stride + k
    wmat = w.data.reshape(in_c, -1)
    xmat = x.data.transpose(0, 2, 3, 1).reshape(-1, in_c)
    canvas = _col2im(xmat @ wmat, (b, out_c, hp, wp), k, stride, h, wd)
    out = canvas[:, :, p : hp - p, p : wp - p] + bias.data.reshape(1, -1, 1, 1)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        gp = np.pad(g, ((0, 0), (0, 0), (p, p), (p, p)))
        gcols = _im2col(gp, k, stride, h, wd)
        gx = (gcols @ wmat.T).reshape(b, h, wd, in_c).transpose(0, 3, 1, 2)
        gw = (xmat.T @ gcols).reshape(w.shape)
        return gx, gw, g.sum(axis=(0, 2, 3))

    return Tensor._from_op(np.ascontiguousarray(out), (x, w, bias), backward)


def maxpool2(x: Tensor) -> Tensor:
    _require_rank("maxpool2", x, 4)
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatchError("maxpool2", "even H and W", x.shape)
    windows = x.data.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    windows = windows.reshape(b, c, h // 2, w // 2, 4)
    # argmax returns the first maximum, i.e. row-major order inside the 2x2 window.
    arg = windows.argmax(axis=-1)[..., None]
    out = np.take_along_axis(windows, arg, axis=-1)[..., 0]

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        routed = np.zeros((b, c, h // 2, w // 2, 4), dtype=g.dtype)
        np.put_along_axis(routed, arg, g[..., None], axis=-1)
        routed = routed.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return (routed.reshape(b, c, h, w),)

    return Tensor._from_op(out, (x,), backward)


def upsample2(x: Tensor) -> Tensor:
    _require_rank("upsample2", x, 4)
    b, c, h, w = x.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)
    return Tensor._from_op(
        out, (x,), lambda g: (g.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5)),)
    )


def global_avg_pool(x: Tensor) -> Tensor:
    _require_rank("global_avg_pool", x, 4)
    return x.mean(axis=(2, 3))


def batchnorm(x: Tensor, params: LayerParams, mode: Mode) -> Tensor:
    """Per-channel normalization over (B, H, W) for rank 4, over B for rank 2."""
    _require_kind("batchnorm", params, LayerKind.BATCH_NORM)
    if x.ndim not in (2, 4):
        raise ShapeMismatchError("batchnorm", "rank 2 or 4", x.shape)
    channels = params.hyper.out_channels
    if x.shape[1] != channels:
        raise ShapeMismatchError("batchnorm", f"(B, {channels}, ...)", x.shape)
    if x.shape[0] == 0:
        raise ShapeMismatchError("batchnorm", "non-empty batch", x.shape)
    axes = (0, 2, 3) if x.ndim == 4 else (0,)
    bshape = (1, channels, 1, 1) if x.ndim == 4 else (1, channels)
    gamma, beta = params.weights, params.bias
    eps = params.hyper.eps
    assert params.running_mean is not None and params.running_var is not None

    if mode == "train":
        n = x.data.size // channels
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mean.reshape(bshape)) * inv_std.reshape(bshape)
        m = params.hyper.momentum
        unbiased = var * n / (n - 1) if n > 1 else var
        params.running_mean = Tensor((1 - m) * params.running_mean.data + m * mean)
        params.running_var = Tensor((1 - m) * params.running_var.data + m * unbiased)

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            dxhat = g * gamma.data.reshape(bshape)
            s1 = dxhat.sum(axis=axes).reshape(bshape)
            s2 = (dxhat * xhat).sum(axis=axes).reshape(bshape)
            gx = inv_std.reshape(bshape) / n * (n * dxhat - s1 - xhat * s2)
            return gx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    else:
        inv_std = 1.0 / np.sqrt(params.running_var.data + eps)
        xhat = (x.data - params.running_mean.data.reshape(bshape)) * inv_std.reshape(bshape)

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            gx = g * (gamma.data * inv_std).reshape(bshape)
            return gx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    out = xhat * gamma.data.reshape(bshape) + beta.data.reshape(bshape)
    return Tensor._from_op(out.astype(x.dtype, copy=False), (x, gamma, beta), backward)


def dense(x: Tensor, params: LayerParams) -> Tensor:
    _require_rank("dense", x, 2)
    _require_kind("dense", params, LayerKind.DENSE)
    w, bias = params.weights, params.bias
    if x.shape[1] != w.shape[1]:
        raise ShapeMismatchError("dense", (x.shape[0], w.shape[1]), x.shape)
    return x @ w.T + bias


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form never overflows.
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def activation(x: Tensor, kind: Activation) -> Tensor:
    if kind == "relu":
        positive = x.data > 0
        return Tensor._from_op(
            np.where(positive, x.data, 0.0).astype(x.dtype), (x,), lambda g: (g * positive,)
        )
    if kind == "sigmoid":
        s = _sigmoid(x.data)
        return Tensor._from_op(s, (x,), lambda g: (g * s * (1.0 - s),))
    if kind == "softmax_rows":
        _require_rank("softmax_rows", x, 2)
        s = softmax(x.data)

        def backward(g: np.ndarray) -> tuple[np.ndarray]:
            return (s * (g - (g * s).sum(axis=1, keepdims=True)),)

        return Tensor._from_op(s, (x,), backward)
    raise ValueError(f"unknown activation: {kind}")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row softmax with max-subtraction."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_labels(labels: Sequence[int] | np.ndarray, batch: int, classes: int) -> np.ndarray:
    idx = np.asarray(labels, dtype=np.int64).reshape(-1)
    if idx.shape[0] != batch:
        raise ShapeMismatchError("labels", (batch,), idx.shape)
    if idx.size and (idx.min() < 0 or idx.max() >= classes):
        raise LabelError(f"label index out of range [0, {classes}): {idx.min()}..{idx.max()}")
    return idx


def cross_entropy(probs: Tensor, labels: Sequence[int] | np.ndarray) -> Tensor:
    """Mean of -ln p[label] over the batch, differentiated w.r.t. the probabilities."""
    _require_rank("cross_entropy", probs, 2)
    b, k = probs.shape
    if not np.allclose(probs.data.sum(axis=1), 1.0, atol=1e-6):
        raise ShapeMismatchError("cross_entropy", "rows summing to 1", probs.shape)
    idx = _check_labels(labels, b, k)
    rows = np.arange(b)
    picked = np.clip(probs.data[rows, idx], np.finfo(probs.dtype).tiny, None)
    loss = -np.log(picked).mean()

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(probs.data)
        grad[rows, idx] = -g / (b * picked)
        return (grad,)

    return Tensor._from_op(np.asarray(loss, dtype=probs.dtype), (probs,), backward)


def softmax_cross_entropy(logits: Tensor, labels: Sequence[int] | np.ndarray) -> Tensor:
    """Fused softmax + cross-entropy; the gradient w.r.t. logits is (softmax - onehot) / B."""
    _require_rank("softmax_cross_entropy", logits, 2)
    b, k = logits.shape
    idx = _check_labels(labels, b, k)
    rows = np.arange(b)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = (log_z - shifted[rows, idx]).mean()
    s = np.exp(shifted - log_z[:, None])

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = s.copy()
        grad[rows, idx] -= 1.0
        return (grad * (g / b),)

    return Tensor._from_op(np.asarray(loss, dtype=logits.dtype), (logits,), backward)


def binary_cross_entropy(probs: Tensor, target: np.ndarray) -> Tensor:
    """Per-sample sum of pixelwise Bernoulli negative log-likelihood -> shape (B,)."""
    if probs.shape != target.shape:
        raise ShapeMismatchError("binary_cross_entropy", probs.shape, target.shape)
    eps = float(np.finfo(probs.dtype).eps)
    p = np.clip(probs.data, eps, 1.0 - eps)
    y = target.astype(probs.dtype, copy=False)
    per_pixel = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    axes = tuple(range(1, probs.ndim))
    out = per_pixel.sum(axis=axes)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        gshape = (-1,) + (1,) * (probs.ndim - 1)
        return (g.reshape(gshape) * (p - y) / (p * (1.0 - p)),)

    return Tensor._from_op(out, (probs,), backward)


def l2_normalize(x: Tensor, eps: float = 1e-12) -> Tensor:
    norm = (x.square().sum(axis=-1, keepdims=True) + eps).sqrt()
    return x / norm
