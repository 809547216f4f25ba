from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from app.classifier.labels import NineClassView, card_label, is_scene_class, view_to_event_label
from app.classifier.model import ClassifierModel
from app.classifier.service import apply_threshold, classify
from app.domain.exceptions import ConfigValidationError
from app.finegrain.model import FinegrainModel
from app.finegrain.service import classify_card
from app.pipeline.schemas import (
    EventDetected,
    FrameVerdict,
    PipelineConfig,
    RejectedLowConfidence,
    RejectedScene,
    RejectedVae,
)
from app.vae.model import VaeModel
from app.vae.service import gate


@dataclass(frozen=True)
class CascadeModels:
    """The three independently trained networks, in infer mode."""

    vae: VaeModel
    classifier: ClassifierModel
    finegrain: FinegrainModel

    def __post_init__(self) -> None:
        if self.classifier.config.label_space != "nine":
            raise ConfigValidationError("the cascade needs the merged 9-class classifier")
        for model in (self.vae, self.classifier, self.finegrain):
            model.eval()


def process_frame(
    frame_index: int, image: np.ndarray, models: CascadeModels, config: PipelineConfig
) -> FrameVerdict:
    """Gate, classify, filter scenes and refine cards, in that order.

    Each stage runs only if the previous one let the frame through; card frames are
    recorded as the colour named by the fine-grain module.
    """
    decision = gate(image, models.vae, config.vae_threshold)
    if not decision.accepted:
        return FrameVerdict(frame_index=frame_index, outcome=RejectedVae(loss=decision.loss))

    output = classify([image], models.classifier)[0]
    if apply_threshold(output, config.softmax_tau) is None:
        outcome = RejectedLowConfidence(top_prob=output.top_prob)
        return FrameVerdict(frame_index=frame_index, outcome=outcome)

    top = NineClassView(output.top_class)
    if is_scene_class(top):
        outcome = RejectedScene(scene_class=top, top_prob=output.top_prob)
        return FrameVerdict(frame_index=frame_index, outcome=outcome)

    if top is NineClassView.CARD:
        kind = card_label(classify_card(image, models.finegrain).color)
    else:
        kind = view_to_event_label(top)
    return FrameVerdict(
        frame_index=frame_index, outcome=EventDetected(kind=kind, confidence=output.top_prob)
    )
