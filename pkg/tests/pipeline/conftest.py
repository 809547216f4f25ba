from __future__ import annotations

import pytest

from app.classifier.model import build_classifier
from app.classifier.schemas import ClassifierConfig
from app.finegrain.model import FinegrainConfig, build_finegrain
from app.pipeline.cascade import CascadeModels
from app.vae.model import build_vae
from app.vae.schemas import VaeConfig


@pytest.fixture
def tiny_models(
    tiny_vae_config: VaeConfig,
    tiny_classifier_config: ClassifierConfig,
    tiny_finegrain_config: FinegrainConfig,
) -> CascadeModels:
    """Untrained networks: enough to exercise wiring, not accuracy."""
    return CascadeModels(
        vae=build_vae(tiny_vae_config, seed=1),
        classifier=build_classifier(tiny_classifier_config, seed=2),
        finegrain=build_finegrain(tiny_finegrain_config, seed=3),
    )
