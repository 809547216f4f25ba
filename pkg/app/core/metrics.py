from __future__ import annotations

from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

# Labels are fixed enums (outcome, kind, component); never frame paths or free-form text.
registry = CollectorRegistry()

frames_processed_total = Counter(
    "frames_processed_total",
    "Frames passed through the detection cascade",
    labelnames=("outcome",),
    registry=registry,
)

frame_processing_seconds = Histogram(
    "frame_processing_seconds",
    "Wall time spent running the cascade on one frame",
    # Desk-scale CPU inference: tens of milliseconds per frame is typical.
    buckets=(0.001, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0, 2.5),
    registry=registry,
)

events_emitted_total = Counter(
    "events_emitted_total",
    "Deduplicated event occurrences emitted by the aggregator",
    labelnames=("kind",),
    registry=registry,
)

training_epochs_total = Counter(
    "training_epochs_total",
    "Completed training epochs",
    labelnames=("component",),
    registry=registry,
)

training_loss = Gauge(
    "training_loss",
    "Most recent epoch loss",
    labelnames=("component",),
    registry=registry,
)


def write_metrics_textfile(path: str | Path) -> None:
    """Dump the registry in text exposition format (node-exporter textfile style)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(path), registry)
