from __future__ import annotations

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.classifier.labels import ClassLabel, NineClassView, is_event_label, is_scene_class
from app.domain.exceptions import LabelError


class RejectedVae(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["rejected_vae"] = "rejected_vae"
    loss: float


class RejectedScene(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["rejected_scene"] = "rejected_scene"
    scene_class: NineClassView
    top_prob: float = Field(ge=0.0, le=1.0)

    @field_validator("scene_class")
    @classmethod
    def _must_be_scene(cls, value: NineClassView) -> NineClassView:
        if not is_scene_class(value):
            raise LabelError(f"{value} is not a scene class")
        return value


class RejectedLowConfidence(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["rejected_low_confidence"] = "rejected_low_confidence"
    top_prob: float = Field(ge=0.0, le=1.0)


class EventDetected(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["event"] = "event"
    kind: ClassLabel
    confidence: float = Field(ge=0.0, le=1.0, description="Classifier top probability.")

    @field_validator("kind")
    @classmethod
    def _must_be_event(cls, value: ClassLabel) -> ClassLabel:
        if not is_event_label(value):
            raise LabelError(f"{value} is a scene class, not an event")
        return value


FrameOutcome = Annotated[
    RejectedVae | RejectedScene | RejectedLowConfidence | EventDetected,
    Field(discriminator="type"),
]

OutcomeName = Literal["rejected_vae", "rejected_scene", "rejected_low_confidence", "event"]


class FrameVerdict(BaseModel):
    """Exactly one cascade outcome for one frame."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    frame_index: int = Field(ge=0)
    outcome: FrameOutcome

    @property
    def event_kind(self) -> ClassLabel | None:
        return self.outcome.kind if isinstance(self.outcome, EventDetected) else None


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fps: float = Field(default=30.0, gt=0.0)
    window: int = Field(default=15, ge=1, description="Vote window in frames; odd.")
    majority: int = Field(default=8, ge=1, description="Frames of one kind needed for a tag.")
    dedup_window_s: float = Field(default=10.0, gt=0.0)
    vae_threshold: float | None = Field(
        default=None,
        gt=0.0,
        description="Gate threshold; falls back to the threshold stored with the VAE.",
    )
    softmax_tau: float = Field(default=0.9, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_vote(self) -> PipelineConfig:
        if self.window % 2 == 0:
            raise ValueError(f"window must be odd, got {self.window}")
        if not self.window / 2 < self.majority <= self.window:
            raise ValueError(
                f"majority must exceed window/2 and fit in the window, got {self.majority}"
            )
        return self

    @property
    def half_window(self) -> int:
        return self.window // 2


class EventTag(BaseModel):
    """A window whose majority voted for one event kind."""

    model_config = ConfigDict(frozen=True)

    kind: ClassLabel
    center: int = Field(ge=0)
    first_frame: int = Field(ge=0)
    last_frame: int = Field(ge=0)
    count: int = Field(ge=1, description="Frames in the window voting for `kind`.")
    confidence_mean: float
    timestamp_s: float


class EventOccurrence(BaseModel):
    """One deduplicated entry of the event log."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ClassLabel
    first_frame: int = Field(ge=0)
    last_frame: int = Field(ge=0)
    timestamp_s: float = Field(ge=0.0)
    confidence_mean: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_span(self) -> EventOccurrence:
        if self.first_frame > self.last_frame:
            raise ValueError("first_frame must not exceed last_frame")
        return self

    @classmethod
    def from_tag(cls, tag: EventTag) -> EventOccurrence:
        return cls(
            kind=tag.kind,
            first_frame=tag.first_frame,
            last_frame=tag.last_frame,
            timestamp_s=tag.timestamp_s,
            confidence_mean=tag.confidence_mean,
        )
