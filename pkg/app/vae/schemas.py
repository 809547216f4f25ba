from __future__ import annotations

from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.nn.tensor import Tensor

LOGVAR_CLAMP = 10.0


class VaeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    input_size: int = Field(default=64, description="Square input side; divisible by 16.")
    latent_dim: int = Field(default=32, ge=1)
    channels: list[int] = Field(default_factory=lambda: [16, 32, 64, 128])
    loss_threshold: float | None = Field(
        default=None,
        gt=0.0,
        description="Gate threshold in per-image loss units (nats); set by calibration.",
    )

    @field_validator("input_size")
    @classmethod
    def _divisible_by_16(cls, v: int) -> int:
        if v <= 0 or v % 16:
            raise ValueError("input_size must be a positive multiple of 16")
        return v

    @field_validator("channels")
    @classmethod
    def _four_stages(cls, v: list[int]) -> list[int]:
        if len(v) != 4 or any(c < 1 for c in v):
            raise ValueError("channels must list four positive stage widths")
        return v

    @property
    def bottleneck(self) -> int:
        return self.input_size // 16

    @property
    def flatten_width(self) -> int:
        return self.channels[-1] * self.bottleneck * self.bottleneck


@dataclass(frozen=True)
class GaussianCode:
    """Encoder output; logvar is already clamped to [-LOGVAR_CLAMP, LOGVAR_CLAMP]."""

    mu: Tensor
    logvar: Tensor


@dataclass(frozen=True)
class VaeLossReport:
    """Per-image loss terms, each of shape (B,)."""

    recon: Tensor
    kl: Tensor
    total: Tensor


@dataclass(frozen=True)
class GateDecision:
    accepted: bool
    loss: float


class CalibrationReport(BaseModel):
    threshold: float
    balanced_accuracy: float
    in_distribution_count: int
    out_distribution_count: int
    units: str = "per-image negative ELBO (nats)"
