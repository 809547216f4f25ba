"""Tests for report rendering and detection matching."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from app.classifier.labels import ClassLabel, NineClassView
from app.evaluation.reports import (
    class_report,
    detection_precision,
    format_class_report,
    format_confusion_table,
    format_detection_table,
    format_known_unknown,
    format_sweep_table,
    format_table,
    known_unknown_report,
    match_detections,
    write_class_report_csv,
    write_confusion_csv,
    write_detection_csv,
    write_sweep_csv,
)
from app.evaluation.sweep import ScoredImage, threshold_sweep
from app.pipeline.schemas import EventOccurrence
from app.synth.schemas import PlantedEvent

CORNER = NineClassView.CORNER_KICK
TACKLE = NineClassView.TACKLE


def _occurrence(kind: ClassLabel, center: int) -> EventOccurrence:
    return EventOccurrence(
        kind=kind,
        first_frame=center - 7,
        last_frame=center + 7,
        timestamp_s=center / 30,
        confidence_mean=0.9,
    )


def _read_csv(path: Path) -> list[list[str]]:
    with path.open(newline="") as fh:
        return list(csv.reader(fh))


def test_format_table_aligns_and_marks_missing() -> None:
    text = format_table(["name", "value"], [["a", 0.5], ["long-name", None]])
    lines = text.splitlines()

    assert lines[0].startswith("name")
    assert set(lines[1].replace(" ", "")) == {"-"}
    assert lines[2] == "a          0.5000"
    assert lines[3] == "long-name  -"


def test_class_report_rows_and_csv(tmp_path: Path) -> None:
    report = class_report(["a", "a", "b"], ["a", None, "b"], ["a", "b", "c"])

    rows = {r.label: r for r in report.rows}
    assert rows["a"].support == 2
    assert rows["a"].recall == pytest.approx(0.5)
    assert rows["c"].f1 is None
    assert report.macro_f1 == pytest.approx((2 / 3 + 1.0) / 2)

    written = _read_csv(write_class_report_csv(tmp_path / "report.csv", report))
    assert written[0] == ["class", "support", "predicted", "precision", "recall", "f1"]
    assert written[3] == ["c", "0", "0", "", "", ""]
    assert "macro f1: 0.8333" in format_class_report(report)


def test_confusion_csv_and_table(tmp_path: Path) -> None:
    matrix = np.array([[1.0, 0.0], [0.25, 0.75]])

    written = _read_csv(write_confusion_csv(tmp_path / "cm.csv", matrix, ["x", "y"]))

    assert written == [
        ["truth", "x", "y"],
        ["x", "1.000000", "0.000000"],
        ["y", "0.250000", "0.750000"],
    ]
    assert "0.7500" in format_confusion_table(matrix, ["x", "y"])


def test_sweep_csv_has_one_row_per_threshold(tmp_path: Path) -> None:
    items = [
        ScoredImage("event", CORNER, CORNER, 0.95),
        ScoredImage("other_soccer", None, TACKLE, 0.7),
        ScoredImage("non_soccer", None, CORNER, 0.85),
    ]
    report = threshold_sweep(items, [0.9, 0.8])

    written = _read_csv(write_sweep_csv(tmp_path / "sweep.csv", report))

    assert written[0][:3] == ["threshold", "f1_event", "recall_nonsoccer"]
    assert [row[0] for row in written[1:]] == ["0.900000", "0.800000"]
    assert "best threshold: 0.9000" in format_sweep_table(report)


def test_known_unknown_report_precision_and_rejection() -> None:
    items = [
        ScoredImage("event", CORNER, CORNER, 0.95),
        ScoredImage("event", TACKLE, CORNER, 0.95),
        ScoredImage("event", TACKLE, TACKLE, 0.5),
        ScoredImage("other_soccer", None, NineClassView.CENTER_CIRCLE, 0.99),
        ScoredImage("other_soccer", None, TACKLE, 0.97),
        ScoredImage("non_soccer", None, CORNER, 0.3),
    ]

    report = known_unknown_report(items, 0.9)
    rows = {(r.group, r.metric): r for r in report.rows}

    assert rows[("CornerKick", "precision")].value == pytest.approx(0.5)
    assert rows[("CornerKick", "precision")].count == 2
    assert rows[("Tackle", "precision")].value == pytest.approx(0.0)
    assert rows[("FreeKick", "precision")].value is None
    assert rows[("Other soccer", "rejection_rate")].value == pytest.approx(0.5)
    assert rows[("Other images", "rejection_rate")].value == pytest.approx(1.0)
    assert report.routing["event"] == {"correct_event": 1, "wrong_event": 1, "no_highlight": 1}
    assert "rejection_rate" in format_known_unknown(report)


def test_detections_match_nearest_planted_event_of_same_kind() -> None:
    truth = [
        PlantedEvent(kind=ClassLabel.CORNER_KICK, frame_index=100),
        PlantedEvent(kind=ClassLabel.CORNER_KICK, frame_index=400),
        PlantedEvent(kind=ClassLabel.RED_CARD, frame_index=700),
    ]
    detected = [
        _occurrence(ClassLabel.CORNER_KICK, 110),
        _occurrence(ClassLabel.CORNER_KICK, 130),  # outside tolerance
        _occurrence(ClassLabel.YELLOW_CARD, 700),  # right place, wrong kind
    ]

    pairs = match_detections(detected, truth)
    assert [g.frame_index if g else None for _, g in pairs] == [100, None, None]

    rows = {r.kind: r for r in detection_precision(detected, truth)}
    assert rows[ClassLabel.CORNER_KICK].precision == pytest.approx(0.5)
    assert rows[ClassLabel.CORNER_KICK].recall == pytest.approx(0.5)
    assert rows[ClassLabel.RED_CARD].precision is None
    assert rows[ClassLabel.RED_CARD].recall == 0.0
    assert rows[ClassLabel.YELLOW_CARD].planted == 0


def test_planted_event_is_claimed_once(tmp_path: Path) -> None:
    truth = [PlantedEvent(kind=ClassLabel.TACKLE, frame_index=50)]
    detected = [_occurrence(ClassLabel.TACKLE, 48), _occurrence(ClassLabel.TACKLE, 52)]

    rows = detection_precision(detected, truth)

    assert rows[0].matched == 1
    assert rows[0].precision == pytest.approx(0.5)
    written = _read_csv(write_detection_csv(tmp_path / "d.csv", rows))
    assert written[1] == ["Tackle", "2", "1", "1", "0.500000", "1.000000"]
    assert "Tackle" in format_detection_table(rows)
