from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np
import pytest

from app.domain.exceptions import ShapeMismatchError
from app.nn.data import minibatches, paired_minibatches, resize_image, to_batch
from app.nn.training import EpochRecord, record_epoch, write_curve_csv


def test_to_batch_is_channels_first_and_resized() -> None:
    images = [np.zeros((32, 32, 3)), np.ones((20, 20, 3))]

    batch = to_batch(images, 16)

    assert batch.shape == (2, 3, 16, 16)
    assert np.allclose(batch[1], 1.0)


def test_empty_batch_keeps_its_shape() -> None:
    assert to_batch([], 8).shape == (0, 3, 8, 8)


def test_resize_refuses_grayscale() -> None:
    with pytest.raises(ShapeMismatchError):
        resize_image(np.zeros((8, 8)), 4)


def test_minibatches_cover_every_index_once() -> None:
    batches = list(minibatches(10, 4, np.random.default_rng(0)))

    assert [len(b) for b in batches] == [4, 4, 2]
    assert sorted(np.concatenate(batches).tolist()) == list(range(10))


def test_paired_batches_hold_two_of_every_class() -> None:
    labels = [0] * 9 + [1] * 4
    batches = list(paired_minibatches(labels, 8, np.random.default_rng(1)))

    assert batches
    for batch in batches:
        chosen = np.asarray(labels)[batch]
        assert (chosen == 0).sum() >= 2
        assert (chosen == 1).sum() >= 2


def test_paired_batches_with_tiny_classes_still_yield() -> None:
    labels = [0, 0, 1, 1, 1]

    batches = list(paired_minibatches(labels, 16, np.random.default_rng(2)))

    assert len(batches) == 1
    assert sorted(np.asarray(labels)[batches[0]].tolist()) == [0, 0, 1, 1]


def test_record_epoch_logs_structured_fields(caplog: pytest.LogCaptureFixture) -> None:
    caplog.set_level(logging.INFO, logger="app.nn")

    record_epoch("classifier", EpochRecord(epoch=3, train_loss=0.25, val_accuracy=0.5))

    [record] = [r for r in caplog.records if r.name == "app.nn"]
    assert record.__dict__["component"] == "classifier"
    assert record.__dict__["epoch"] == 3
    assert record.__dict__["loss"] == 0.25
    assert record.__dict__["accuracy"] == 0.5


def test_curve_csv_has_one_row_per_epoch(tmp_path: Path) -> None:
    curve = [EpochRecord(1, 0.9), EpochRecord(2, 0.5, val_loss=0.6)]

    with write_curve_csv(tmp_path / "curve.csv", curve).open(newline="") as fh:
        rows = list(csv.DictReader(fh))

    assert [r["epoch"] for r in rows] == ["1", "2"]
    assert rows[0]["val_loss"] == ""
    assert rows[1]["val_loss"] == "0.6"
