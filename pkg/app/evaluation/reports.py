"""CSV and plain-text renderings of the evaluation results.

Every table is written twice: a CSV for tooling and an aligned text table for reading.
Absent metrics are written as empty CSV cells and as "-" in text tables.
"""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from app.classifier.labels import NINE_CLASSES, ClassLabel, is_scene_class
from app.evaluation.counts import f1, macro_f1, per_class_counts, precision, recall
from app.evaluation.sweep import ScoredImage, SweepReport
from app.pipeline.schemas import EventOccurrence
from app.synth.schemas import PlantedEvent

DETECTION_TOLERANCE_FRAMES = 15
_GROUP_TITLES = {"other_soccer": "Other soccer", "non_soccer": "Other images"}


def _cell(value: object, digits: int = 4) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def format_table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    text = [list(headers)] + [[_cell(v) or "-" for v in row] for row in rows]
    widths = [max(len(r[i]) for r in text) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths, strict=True)).rstrip() for r in text]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _write_csv(
    path: str | Path, headers: Sequence[str], rows: Sequence[Sequence[object]]
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows([[_cell(v, 6) for v in row] for row in rows])
    return path


_SWEEP_HEADERS = (
    "threshold",
    "f1_event",
    "recall_nonsoccer",
    "recall_no_highlight",
    "precision_event",
    "recall_event",
    "accepted_count",
)


def _sweep_rows(report: SweepReport) -> list[list[object]]:
    return [
        [
            r.threshold,
            r.f1_event,
            r.recall_nonsoccer,
            r.recall_no_highlight,
            r.precision_event,
            r.recall_event,
            r.accepted_count,
        ]
        for r in report.rows
    ]


def write_sweep_csv(path: str | Path, report: SweepReport) -> Path:
    return _write_csv(path, _SWEEP_HEADERS, _sweep_rows(report))


def format_sweep_table(report: SweepReport) -> str:
    table = format_table(_SWEEP_HEADERS, _sweep_rows(report))
    return table + f"best threshold: {report.best_threshold:.4f}\n"


def write_confusion_csv(path: str | Path, matrix: np.ndarray, names: Sequence[str]) -> Path:
    rows = [[name, *(float(v) for v in row)] for name, row in zip(names, matrix, strict=True)]
    return _write_csv(path, ["truth", *names], rows)


def format_confusion_table(matrix: np.ndarray, names: Sequence[str]) -> str:
    rows = [[name, *(float(v) for v in row)] for name, row in zip(names, matrix, strict=True)]
    return format_table(["truth \\ predicted", *names], rows)


class ClassMetricsRow(BaseModel):
    label: str
    support: int
    predicted: int
    precision: float | None
    recall: float | None
    f1: float | None


@dataclass(frozen=True)
class ClassReport:
    rows: list[ClassMetricsRow]
    macro_f1: float | None


def class_report(
    truth: Sequence[str], predicted: Sequence[str | None], classes: Sequence[str]
) -> ClassReport:
    """Per-class precision/recall/F1; a None prediction (rejected) matches no class."""
    counts = per_class_counts(truth, predicted, classes)
    rows = [
        ClassMetricsRow(
            label=c,
            support=counts[c].positives,
            predicted=counts[c].tp + counts[c].fp,
            precision=precision(counts[c]),
            recall=recall(counts[c]),
            f1=f1(counts[c]),
        )
        for c in classes
    ]
    return ClassReport(rows=rows, macro_f1=macro_f1(counts))


_CLASS_HEADERS = ("class", "support", "predicted", "precision", "recall", "f1")


def _class_rows(report: ClassReport) -> list[list[object]]:
    return [[r.label, r.support, r.predicted, r.precision, r.recall, r.f1] for r in report.rows]


def write_class_report_csv(path: str | Path, report: ClassReport) -> Path:
    return _write_csv(path, _CLASS_HEADERS, _class_rows(report))


def format_class_report(report: ClassReport) -> str:
    table = format_table(_CLASS_HEADERS, _class_rows(report))
    return table + f"macro f1: {_cell(report.macro_f1) or '-'}\n"


class KnownUnknownRow(BaseModel):
    group: str
    metric: str
    value: float | None
    count: int


@dataclass(frozen=True)
class KnownUnknownReport:
    rows: list[KnownUnknownRow]
    routing: dict[str, dict[str, int]]


def known_unknown_report(items: Sequence[ScoredImage], tau: float) -> KnownUnknownReport:
    """Event precision per predicted class plus rejection rates of the no-highlight groups.

    Routing counts how event images end up (correct event, wrong event, no highlight)
    and how no-highlight images end up (event, no highlight).
    """
    rows: list[KnownUnknownRow] = []
    for view in NINE_CLASSES:
        if is_scene_class(view):
            continue
        claimed = [i for i in items if i.predicted_event(tau) and i.top_class is view]
        correct = sum(i.group == "event" and i.truth is view for i in claimed)
        value = correct / len(claimed) if claimed else None
        rows.append(
            KnownUnknownRow(group=str(view), metric="precision", value=value, count=len(claimed))
        )

    routing: dict[str, dict[str, int]] = {
        "event": {"correct_event": 0, "wrong_event": 0, "no_highlight": 0}
    }
    for item in items:
        predicted = item.predicted_event(tau)
        if item.group == "event":
            key = "no_highlight"
            if predicted:
                key = "correct_event" if item.top_class is item.truth else "wrong_event"
            routing["event"][key] += 1
        else:
            bucket = routing.setdefault(item.group, {"event": 0, "no_highlight": 0})
            bucket["event" if predicted else "no_highlight"] += 1

    for group, title in _GROUP_TITLES.items():
        bucket = routing.get(group)
        total = sum(bucket.values()) if bucket else 0
        value = bucket["no_highlight"] / total if bucket and total else None
        rows.append(
            KnownUnknownRow(group=title, metric="rejection_rate", value=value, count=total)
        )
    return KnownUnknownReport(rows=rows, routing=routing)


_KNOWN_HEADERS = ("group", "metric", "value", "count")


def _known_rows(report: KnownUnknownReport) -> list[list[object]]:
    return [[r.group, r.metric, r.value, r.count] for r in report.rows]


def write_known_unknown_csv(path: str | Path, report: KnownUnknownReport) -> Path:
    return _write_csv(path, _KNOWN_HEADERS, _known_rows(report))


def format_known_unknown(report: KnownUnknownReport) -> str:
    return format_table(_KNOWN_HEADERS, _known_rows(report))


class DetectionPrecisionRow(BaseModel):
    kind: ClassLabel
    detected: int
    planted: int
    matched: int
    precision: float | None
    recall: float | None


def _center(occ: EventOccurrence) -> int:
    return (occ.first_frame + occ.last_frame) // 2


def match_detections(
    occurrences: Sequence[EventOccurrence],
    ground_truth: Sequence[PlantedEvent],
    tolerance: int = DETECTION_TOLERANCE_FRAMES,
) -> list[tuple[EventOccurrence, PlantedEvent | None]]:
    """Pair each occurrence with the nearest unclaimed planted event of its kind."""
    free = list(ground_truth)
    pairs: list[tuple[EventOccurrence, PlantedEvent | None]] = []
    for occ in sorted(occurrences, key=_center):
        candidates = [
            g
            for g in free
            if g.kind is occ.kind and abs(g.frame_index - _center(occ)) <= tolerance
        ]
        best = min(candidates, key=lambda g: abs(g.frame_index - _center(occ)), default=None)
        if best is not None:
            free.remove(best)
        pairs.append((occ, best))
    return pairs


def detection_precision(
    occurrences: Sequence[EventOccurrence],
    ground_truth: Sequence[PlantedEvent],
    tolerance: int = DETECTION_TOLERANCE_FRAMES,
) -> list[DetectionPrecisionRow]:
    """Per-kind precision and recall of an event log against planted ground truth."""
    pairs = match_detections(occurrences, ground_truth, tolerance)
    kinds = sorted(
        {occ.kind for occ in occurrences} | {g.kind for g in ground_truth},
        key=list(ClassLabel).index,
    )
    rows = []
    for kind in kinds:
        detected = sum(occ.kind is kind for occ, _ in pairs)
        matched = sum(occ.kind is kind and g is not None for occ, g in pairs)
        planted = sum(g.kind is kind for g in ground_truth)
        rows.append(
            DetectionPrecisionRow(
                kind=kind,
                detected=detected,
                planted=planted,
                matched=matched,
                precision=matched / detected if detected else None,
                recall=matched / planted if planted else None,
            )
        )
    return rows


_DETECTION_HEADERS = ("kind", "detected", "planted", "matched", "precision", "recall")


def _detection_rows(rows: Sequence[DetectionPrecisionRow]) -> list[list[object]]:
    return [[r.kind, r.detected, r.planted, r.matched, r.precision, r.recall] for r in rows]


def write_detection_csv(path: str | Path, rows: Sequence[DetectionPrecisionRow]) -> Path:
    return _write_csv(path, _DETECTION_HEADERS, _detection_rows(rows))


def format_detection_table(rows: Sequence[DetectionPrecisionRow]) -> str:
    return format_table(_DETECTION_HEADERS, _detection_rows(rows))
