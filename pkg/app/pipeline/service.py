from __future__ import annotations

import json
import logging
import time
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import islice
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from app.classifier.labels import ClassLabel
from app.core.metrics import events_emitted_total, frame_processing_seconds, frames_processed_total
from app.domain.exceptions import DatasetError
from app.pipeline.aggregator import EventAggregator, aggregate
from app.pipeline.cascade import CascadeModels, process_frame
from app.pipeline.frames import iter_frames
from app.pipeline.schemas import EventOccurrence, EventTag, FrameVerdict, PipelineConfig

logger = logging.getLogger("app.pipeline")

_CHUNK_PER_WORKER = 4


@dataclass(frozen=True)
class DetectionResult:
    occurrences: list[EventOccurrence]
    trace: list[FrameVerdict]
    tags: list[EventTag]

    def counts(self) -> dict[ClassLabel, int]:
        """Occurrences per event kind, the statistics a match summary reports."""
        return dict(Counter(occ.kind for occ in self.occurrences))


def _timed_verdict(
    frame: tuple[int, np.ndarray], models: CascadeModels, config: PipelineConfig
) -> FrameVerdict:
    started = time.perf_counter()
    verdict = process_frame(frame[0], frame[1], models, config)
    frame_processing_seconds.observe(time.perf_counter() - started)
    return verdict


def _verdicts(
    frames: Iterable[tuple[int, np.ndarray]],
    models: CascadeModels,
    config: PipelineConfig,
    workers: int,
) -> Iterator[FrameVerdict]:
    if workers <= 1:
        for frame in frames:
            yield _timed_verdict(frame, models, config)
        return
    frames = iter(frames)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while chunk := list(islice(frames, workers * _CHUNK_PER_WORKER)):
            yield from pool.map(lambda f: _timed_verdict(f, models, config), chunk)


def run_detection(
    frames: Iterable[tuple[int, np.ndarray]],
    models: CascadeModels,
    config: PipelineConfig,
    *,
    workers: int = 1,
) -> DetectionResult:
    """Cascade every frame, vote over sliding windows and deduplicate per kind.

    Frames may be processed on a thread pool; verdicts still reach the aggregator in
    arrival order, and an out-of-order index raises FrameOrderError.
    """
    aggregator = EventAggregator(config)
    trace: list[FrameVerdict] = []
    for verdict in _verdicts(frames, models, config, workers):
        occurrence = aggregator.push(verdict)
        trace.append(verdict)
        frames_processed_total.labels(outcome=verdict.outcome.type).inc()
        logger.debug(
            "frame processed",
            extra={"frame_index": verdict.frame_index, "outcome": verdict.outcome.type},
        )
        if occurrence is not None:
            events_emitted_total.labels(kind=occurrence.kind.value).inc()
            logger.info(
                "event detected",
                extra={"kind": occurrence.kind.value, "frame_index": occurrence.first_frame},
            )
    return DetectionResult(
        occurrences=list(aggregator.occurrences), trace=trace, tags=list(aggregator.tags)
    )


def detect_directory(
    frames_dir: str | Path,
    models: CascadeModels,
    config: PipelineConfig,
    *,
    workers: int = 1,
) -> DetectionResult:
    started = time.perf_counter()
    result = run_detection(iter_frames(frames_dir), models, config, workers=workers)
    logger.info(
        "detection finished",
        extra={
            "component": "pipeline",
            "path": str(frames_dir),
            "duration_ms": int((time.perf_counter() - started) * 1000),
        },
    )
    return result


def replay(trace: Sequence[FrameVerdict], config: PipelineConfig) -> DetectionResult:
    """Re-aggregate stored verdicts without touching any model."""
    tags, occurrences = aggregate(trace, config)
    return DetectionResult(occurrences=occurrences, trace=list(trace), tags=tags)


def write_event_log(path: str | Path, occurrences: Sequence[EventOccurrence]) -> Path:
    """One JSON object per line: kind, first_frame, last_frame, timestamp_s, confidence_mean."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for occ in occurrences:
            fh.write(occ.model_dump_json() + "\n")
    return path


def read_event_log(path: str | Path) -> list[EventOccurrence]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
        return [EventOccurrence.model_validate_json(line) for line in lines if line.strip()]
    except (OSError, ValidationError) as exc:
        raise DatasetError("cannot read event log", str(path)) from exc


def write_trace(path: str | Path, result: DetectionResult) -> Path:
    """Frame verdicts first, then every tag flagged with whether dedup suppressed it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    emitted = {(occ.kind, occ.first_frame) for occ in result.occurrences}
    with path.open("w", encoding="utf-8") as fh:
        for verdict in result.trace:
            fh.write(json.dumps({"record": "frame", **verdict.model_dump(mode="json")}) + "\n")
        for tag in result.tags:
            row = {
                "record": "tag",
                **tag.model_dump(mode="json"),
                "suppressed": (tag.kind, tag.first_frame) not in emitted,
            }
            fh.write(json.dumps(row) + "\n")
    return path


def read_trace(path: str | Path) -> list[FrameVerdict]:
    path = Path(path)
    verdicts = []
    try:
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            if row.pop("record", None) == "frame":
                verdicts.append(FrameVerdict.model_validate(row))
    except (OSError, ValueError) as exc:
        raise DatasetError("cannot read trace", str(path)) from exc
    return verdicts
