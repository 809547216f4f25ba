"""Convolutional VAE used as the no-highlight gate.

Encoder: four (conv 3x3 + batchnorm + relu + maxpool) stages, flatten, two dense heads.
Decoder: dense, reshape to (B, C4, S/16, S/16), three (upsample + conv-transpose +
batchnorm + relu) stages and a last (upsample + conv-transpose) stage into 3 sigmoid
channels.
"""

from __future__ import annotations

import numpy as np

from app.domain.exceptions import DatasetError, ShapeMismatchError
from app.nn import functional as F
from app.nn.layers import (
    Module,
    batchnorm_params,
    conv_params,
    conv_transpose_params,
    dense_params,
)
from app.nn.tensor import Tensor
from app.vae.schemas import LOGVAR_CLAMP, GaussianCode, VaeConfig, VaeLossReport


class VaeModel(Module):
    def __init__(self, config: VaeConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        c = config.channels
        widths = [3, *c]
        for i in range(4):
            self.layers[f"enc{i}_conv"] = conv_params(rng, widths[i], widths[i + 1])
            self.layers[f"enc{i}_bn"] = batchnorm_params(widths[i + 1])
        self.layers["fc_mu"] = dense_params(rng, config.flatten_width, config.latent_dim)
        self.layers["fc_logvar"] = dense_params(rng, config.flatten_width, config.latent_dim)
        self.layers["dec_fc"] = dense_params(rng, config.latent_dim, config.flatten_width)
        dec_widths = [c[3], c[2], c[1], c[0]]
        for i in range(3):
            self.layers[f"dec{i}_convt"] = conv_transpose_params(
                rng, dec_widths[i], dec_widths[i + 1]
            )
            self.layers[f"dec{i}_bn"] = batchnorm_params(dec_widths[i + 1])
        self.layers["dec3_convt"] = conv_transpose_params(rng, c[0], 3)

    def encode(self, images: Tensor) -> GaussianCode:
        s = self.config.input_size
        if images.ndim != 4 or images.shape[1:] != (3, s, s):
            raise ShapeMismatchError("vae.encode", f"(B, 3, {s}, {s})", images.shape)
        h = images
        for i in range(4):
            h = F.conv2d(h, self.layers[f"enc{i}_conv"])
            h = F.batchnorm(h, self.layers[f"enc{i}_bn"], self.mode)
            h = F.activation(h, "relu")
            h = F.maxpool2(h)
        flat = h.reshape(h.shape[0], self.config.flatten_width)
        mu = F.dense(flat, self.layers["fc_mu"])
        logvar = F.dense(flat, self.layers["fc_logvar"]).clip(-LOGVAR_CLAMP, LOGVAR_CLAMP)
        return GaussianCode(mu=mu, logvar=logvar)

    def decode(self, z: Tensor) -> Tensor:
        cfg = self.config
        if z.ndim != 2 or z.shape[1] != cfg.latent_dim:
            raise ShapeMismatchError("vae.decode", f"(B, {cfg.latent_dim})", z.shape)
        b = cfg.bottleneck
        h = F.dense(z, self.layers["dec_fc"]).reshape(z.shape[0], cfg.channels[-1], b, b)
        for i in range(3):
            h = F.upsample2(h)
            h = F.conv_transpose2d(h, self.layers[f"dec{i}_convt"])
            h = F.batchnorm(h, self.layers[f"dec{i}_bn"], self.mode)
            h = F.activation(h, "relu")
        h = F.conv_transpose2d(F.upsample2(h), self.layers["dec3_convt"])
        return F.activation(h, "sigmoid")

    def reconstruct(
        self, images: Tensor, noise: Tensor | None = None
    ) -> tuple[Tensor, GaussianCode]:
        """Encode, sample (z = mu when `noise` is None) and decode."""
        code = self.encode(images)
        z = code.mu if noise is None else reparameterize(code, noise)
        return self.decode(z), code


def reparameterize(code: GaussianCode, noise: Tensor) -> Tensor:
    if noise.shape != code.mu.shape:
        raise ShapeMismatchError("reparameterize", code.mu.shape, noise.shape)
    return code.mu + (code.logvar * 0.5).exp() * noise


def kl_divergence(code: GaussianCode) -> Tensor:
    """KL(q(z|x) || N(0, I)) per image.

    Written with expm1 so the per-coordinate term exp(lv) - 1 - lv never rounds below zero.
    """
    mu, logvar = code.mu, code.logvar
    spread = np.maximum(np.expm1(logvar.data) - logvar.data, 0.0)
    out = 0.5 * (mu.data * mu.data + spread).sum(axis=1)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        col = g[:, None]
        return col * mu.data, 0.5 * col * np.expm1(logvar.data)

    return Tensor._from_op(out, (mu, logvar), backward)


def elbo_loss(images: Tensor | np.ndarray, recon: Tensor, code: GaussianCode) -> VaeLossReport:
    """Per-image Bernoulli reconstruction NLL plus KL; `total` is their exact sum."""
    target = images.data if isinstance(images, Tensor) else np.asarray(images)
    if target.size and (target.min() < 0.0 or target.max() > 1.0):
        raise DatasetError("VAE images must have values in [0, 1]")
    recon_term = F.binary_cross_entropy(recon, target)
    kl = kl_divergence(code)
    return VaeLossReport(recon=recon_term, kl=kl, total=recon_term + kl)


def build_vae(config: VaeConfig, *, seed: int = 0, dtype: str = "float64") -> VaeModel:
    model = VaeModel(config, np.random.default_rng(seed))
    if dtype != "float64":
        model.astype(dtype)
    return model
