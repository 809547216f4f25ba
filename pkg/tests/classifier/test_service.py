"""Nine-class (and flat ten-class) classifier: inference, thresholding, training, files."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pytest

from app.classifier.labels import (
    NINE_CLASSES,
    SCENE_CLASSES,
    TEN_CLASSES,
    ClassLabel,
    NineClassView,
    PoolLabel,
)
from app.classifier.model import build_classifier
from app.classifier.schemas import ClassifierConfig, ClassifierOutput
from app.classifier.service import (
    apply_threshold,
    classify,
    classify_with_threshold,
    load_classifier,
    predict_probs,
    read_predictions_csv,
    save_classifier,
    to_label_space,
    train_classifier,
    write_predictions_csv,
)
from app.domain.exceptions import (
    CheckpointError,
    ConfigValidationError,
    DatasetError,
    ShapeMismatchError,
)
from app.nn.tensor import Tensor
from app.nn.training import TrainingConfig
from app.synth.manifest import DatasetManifest, load
from app.vae.model import build_vae
from app.vae.schemas import VaeConfig
from app.vae.service import save_vae


def _output(top_prob: float) -> ClassifierOutput:
    rest = (1.0 - top_prob) / 8
    return ClassifierOutput(
        probs=(top_prob, *([rest] * 8)),
        top_class=NineClassView.PENALTY_KICK,
        top_prob=top_prob,
    )


def test_label_space_mapping(tiny_classifier_config: ClassifierConfig) -> None:
    flat = tiny_classifier_config.model_copy(update={"label_space": "ten"})

    assert to_label_space(ClassLabel.RED_CARD, tiny_classifier_config) is NineClassView.CARD
    assert to_label_space(ClassLabel.RED_CARD, flat) is ClassLabel.RED_CARD
    assert tiny_classifier_config.classes == NINE_CLASSES
    assert flat.classes == TEN_CLASSES


def test_config_needs_input_divisible_by_pooling() -> None:
    with pytest.raises(ValueError):
        ClassifierConfig(input_size=20, channels=[4, 4, 4])


def test_probabilities_are_rows_summing_to_one(
    tiny_classifier_config: ClassifierConfig, rng: np.random.Generator
) -> None:
    model = build_classifier(tiny_classifier_config, seed=1)

    probs = predict_probs(model, rng.uniform(size=(5, 3, 16, 16)))

    assert probs.shape == (5, 9)
    assert np.allclose(probs.sum(axis=1), 1.0)
    assert predict_probs(model, np.zeros((0, 3, 16, 16))).shape == (0, 9)
    assert model.mode == "train"


def test_forward_matches_predicted_probabilities(
    tiny_classifier_config: ClassifierConfig, rng: np.random.Generator
) -> None:
    model = build_classifier(tiny_classifier_config, seed=1).eval()
    batch = rng.uniform(size=(2, 3, 16, 16))

    assert np.allclose(model.forward(Tensor(batch)).data, predict_probs(model, batch))


def test_wrong_input_size_is_a_shape_error(tiny_classifier_config: ClassifierConfig) -> None:
    model = build_classifier(tiny_classifier_config)

    with pytest.raises(ShapeMismatchError):
        model.logits(Tensor(np.zeros((1, 3, 32, 32))))


def test_classify_reports_top_class(
    tiny_classifier_config: ClassifierConfig, rng: np.random.Generator
) -> None:
    model = build_classifier(tiny_classifier_config, seed=2)

    [out] = classify([rng.uniform(size=(30, 30, 3))], model)

    assert out.top_class is NINE_CLASSES[int(np.argmax(out.probs))]
    assert out.top_prob == max(out.probs)


def test_threshold_is_strict() -> None:
    assert apply_threshold(_output(0.9), 0.9) is None
    assert apply_threshold(_output(0.9), 0.89) is not None
    assert apply_threshold(_output(0.2), 0.0) is not None


@pytest.mark.parametrize("tau", [1.0, -0.01])
def test_threshold_outside_unit_interval_is_refused(tau: float) -> None:
    with pytest.raises(ConfigValidationError):
        apply_threshold(_output(0.5), tau)


def test_uniform_output_is_rejected_by_any_useful_threshold(
    tiny_classifier_config: ClassifierConfig,
) -> None:
    # The head starts near zero, so an untrained model is close to uniform.
    model = build_classifier(tiny_classifier_config, seed=3)

    assert classify_with_threshold(np.full((16, 16, 3), 0.5), model, 0.5) is None


def test_predictions_csv_round_trip(tmp_path: Path) -> None:
    outputs = [_output(0.95), _output(0.4)]
    classes = [str(c) for c in NINE_CLASSES]

    path = write_predictions_csv(
        tmp_path / "pred.csv", ["f1", "f2"], outputs, tau=0.9, classes=classes
    )
    names, records = read_predictions_csv(path)

    assert names == classes
    assert [r.frame_id for r in records] == ["f1", "f2"]
    assert [r.decision for r in records] == ["PenaltyKick", None]
    assert records[0].top_index() == 0
    assert records[1].probs[0] == pytest.approx(0.4)


@pytest.mark.parametrize(
    "content",
    [
        "",
        "id,a,b\nx,0.5,0.5\n",
        "frame_id,a,decision\nx,half,a\n",
        "frame_id,a,decision\nx\n",
    ],
)
def test_malformed_predictions_file(tmp_path: Path, content: str) -> None:
    path = tmp_path / "pred.csv"
    path.write_text(content)

    with pytest.raises(DatasetError):
        read_predictions_csv(path)


def test_training_on_every_class(
    tiny_dataset: DatasetManifest,
    tiny_classifier_config: ClassifierConfig,
    tiny_training: TrainingConfig,
    caplog: pytest.LogCaptureFixture,
) -> None:
    caplog.set_level(logging.INFO, logger="app.nn")
    train = list(load(tiny_dataset, "train", labels=TEN_CLASSES))
    val = list(load(tiny_dataset, "val", labels=TEN_CLASSES))

    result = train_classifier(train, val, config=tiny_classifier_config, training=tiny_training)

    assert [r.epoch for r in result.curve] == [1, 2]
    for record in result.curve:
        assert record.train_accuracy is not None and 0.0 <= record.train_accuracy <= 1.0
        assert record.val_accuracy is not None
    components = {r.__dict__["component"] for r in caplog.records if r.name == "app.nn"}
    assert components == {"classifier"}


def test_flat_training_logs_its_own_component(
    tiny_dataset: DatasetManifest,
    tiny_classifier_config: ClassifierConfig,
    tiny_training: TrainingConfig,
    caplog: pytest.LogCaptureFixture,
) -> None:
    caplog.set_level(logging.INFO, logger="app.nn")
    flat = tiny_classifier_config.model_copy(update={"label_space": "ten"})
    train = list(load(tiny_dataset, "train", labels=TEN_CLASSES))

    result = train_classifier(
        train, [], config=flat, training=tiny_training.model_copy(update={"epochs": 1})
    )

    assert result.model.config.num_classes == 10
    assert result.curve[0].val_accuracy is None
    assert {r.__dict__["component"] for r in caplog.records if r.name == "app.nn"} == {
        "classifier_flat"
    }


def test_training_needs_every_class(
    tiny_dataset: DatasetManifest, tiny_classifier_config: ClassifierConfig
) -> None:
    without_scenes = list(load(tiny_dataset, "train", labels=set(TEN_CLASSES) - SCENE_CLASSES))

    with pytest.raises(DatasetError, match="CenterCircle"):
        train_classifier(without_scenes, [], config=tiny_classifier_config)


def test_training_refuses_pool_images(
    tiny_dataset: DatasetManifest, tiny_classifier_config: ClassifierConfig
) -> None:
    images = list(load(tiny_dataset, "train", labels=[PoolLabel.NON_SOCCER]))

    with pytest.raises(DatasetError):
        train_classifier(images, [], config=tiny_classifier_config)


def test_checkpoint_round_trip(
    tmp_path: Path, tiny_classifier_config: ClassifierConfig, rng: np.random.Generator
) -> None:
    model = build_classifier(tiny_classifier_config, seed=6)
    batch = rng.uniform(size=(3, 3, 16, 16))

    restored = load_classifier(save_classifier(model, tmp_path / "clf.ckpt"))

    assert restored.config == tiny_classifier_config
    assert np.allclose(predict_probs(restored, batch), predict_probs(model, batch))


def test_loading_a_vae_checkpoint_is_refused(
    tmp_path: Path, tiny_vae_config: VaeConfig
) -> None:
    path = save_vae(build_vae(tiny_vae_config), tmp_path / "vae.ckpt")

    with pytest.raises(CheckpointError):
        load_classifier(path)
