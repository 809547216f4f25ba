from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from app.classifier.labels import CARD_COLORS, EVENT_CLASSES, TEN_CLASSES, PoolLabel, card_label
from app.classifier.model import ClassifierModel
from app.classifier.schemas import AugmentationConfig, ClassifierConfig
from app.classifier.service import train_classifier
from app.evaluation.sweep import score_images, threshold_sweep
from app.finegrain.model import FinegrainConfig
from app.finegrain.service import train_finegrain
from app.nn.data import to_batch
from app.nn.training import TrainingConfig
from app.pipeline.cascade import CascadeModels
from app.pipeline.schemas import PipelineConfig
from app.synth.manifest import DatasetManifest, load
from app.synth.schemas import SplitCounts, SynthSpec
from app.synth.service import generate
from app.vae.model import VaeModel
from app.vae.schemas import VaeConfig
from app.vae.service import VaeTrainingResult, calibrate_threshold, image_losses, train_vae

_SETTINGS_ENV = (
    "APP_ENV",
    "SOCCER_SEED",
    "SOCCER_TRAIN_DTYPE",
    "SOCCER_METRICS_TEXTFILE",
    "SOCCER_DATA_DIR",
)


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> Iterator[None]:
    for name in _SETTINGS_ENV:
        monkeypatch.delenv(name, raising=False)
    # A stray .env in the checkout must not leak into tests.
    monkeypatch.chdir(tmp_path)
    # Settings are cached via @lru_cache; clear so each test sees its own environment.
    from app.core.settings import get_settings

    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_spec() -> SynthSpec:
    return SynthSpec(
        seed=3,
        image_size=32,
        class_counts=SplitCounts(train=4, val=2, test=2),
        pool_counts=SplitCounts(train=2, val=2, test=2),
    )


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory: pytest.TempPathFactory) -> DatasetManifest:
    spec = SynthSpec(
        seed=11,
        image_size=32,
        class_counts=SplitCounts(train=4, val=2, test=2),
        pool_counts=SplitCounts(train=2, val=2, test=2),
    )
    return generate(spec, tmp_path_factory.mktemp("tiny_dataset"))


@pytest.fixture
def tiny_vae_config() -> VaeConfig:
    return VaeConfig(input_size=16, latent_dim=4, channels=[2, 3, 4, 4])


@pytest.fixture
def tiny_classifier_config() -> ClassifierConfig:
    return ClassifierConfig(
        input_size=16,
        channels=[4, 6],
        augmentation=AugmentationConfig(enabled=False),
    )


@pytest.fixture
def tiny_finegrain_config() -> FinegrainConfig:
    return FinegrainConfig(
        input_size=16,
        channels=[4, 6],
        feature_dim=5,
        reduction=2,
        augmentation=AugmentationConfig(enabled=False),
    )


@pytest.fixture
def tiny_training() -> TrainingConfig:
    return TrainingConfig(epochs=2, batch_size=8, lr=1e-3, seed=0, dtype="float64")


# Desk-scale dataset and trained models, shared by the slow end-to-end tests.

DESK_TRAINING = TrainingConfig(epochs=20, batch_size=16, lr=1e-3, seed=0, dtype="float32")
DESK_VAE = VaeConfig(input_size=32, latent_dim=16, channels=[8, 16, 32, 32])
DESK_CLASSIFIER = ClassifierConfig(input_size=32, channels=[8, 16, 32])
DESK_FINEGRAIN = FinegrainConfig(input_size=32, channels=[8, 16, 32], feature_dim=16)


def desk_spec(seed: int) -> SynthSpec:
    return SynthSpec(
        seed=seed,
        image_size=32,
        class_counts=SplitCounts(train=24, val=8, test=16),
        pool_counts=SplitCounts(train=24, val=24, test=24),
    )


@dataclass(frozen=True)
class DeskStack:
    spec: SynthSpec
    dataset: DatasetManifest
    vae: VaeTrainingResult
    models: CascadeModels
    pipeline: PipelineConfig


def calibrated_pipeline(
    dataset: DatasetManifest, vae: VaeModel, classifier: ClassifierModel
) -> PipelineConfig:
    """VAE threshold and softmax tau chosen on the validation split."""
    size = vae.config.input_size
    ins = [i.image for i in load(dataset, "val", labels=EVENT_CLASSES)]
    outs = [i.image for i in load(dataset, "val", labels=[PoolLabel.NON_SOCCER])]
    threshold = calibrate_threshold(
        image_losses(vae, to_batch(ins, size)), image_losses(vae, to_batch(outs, size))
    ).threshold
    scored = score_images(
        list(load(dataset, "val")), classifier, vae=vae, vae_threshold=threshold
    )
    tau = threshold_sweep(scored).best_threshold
    return PipelineConfig(vae_threshold=threshold, softmax_tau=tau)


@pytest.fixture(scope="session")
def desk_stack(tmp_path_factory: pytest.TempPathFactory) -> DeskStack:
    spec = desk_spec(5)
    dataset = generate(spec, tmp_path_factory.mktemp("desk_dataset"))
    cards = [card_label(c) for c in CARD_COLORS]

    vae = train_vae(
        list(load(dataset, "train", labels=EVENT_CLASSES)),
        list(load(dataset, "val", labels=EVENT_CLASSES)),
        config=DESK_VAE,
        training=DESK_TRAINING,
    )
    classifier = train_classifier(
        list(load(dataset, "train", labels=TEN_CLASSES)),
        list(load(dataset, "val", labels=TEN_CLASSES)),
        config=DESK_CLASSIFIER,
        training=DESK_TRAINING,
    ).model
    finegrain = train_finegrain(
        list(load(dataset, "train", labels=cards)),
        list(load(dataset, "val", labels=cards)),
        config=DESK_FINEGRAIN,
        training=DESK_TRAINING,
    ).model

    return DeskStack(
        spec=spec,
        dataset=dataset,
        vae=vae,
        models=CascadeModels(vae=vae.model, classifier=classifier, finegrain=finegrain),
        pipeline=calibrated_pipeline(dataset, vae.model, classifier),
    )
