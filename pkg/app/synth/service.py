from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from app.classifier.labels import EVENT_CLASSES, ClassLabel, PoolLabel
from app.domain.exceptions import ConfigValidationError, DatasetError
from app.synth.manifest import (
    SPEC_NAME,
    DatasetManifest,
    read_manifest,
    validate_manifest,
    write_image,
    write_manifest,
)
from app.synth.render import render
from app.synth.schemas import (
    SPLITS,
    DatasetLabel,
    ManifestEntry,
    PlantedEvent,
    PlantedMatch,
    Split,
    SynthSpec,
)

logger = logging.getLogger("app.synth")

FRAMES_MANIFEST = "frames.txt"
GROUND_TRUTH = "ground_truth.txt"
PLANT_RUN = 15
MIN_PLANT_GAP = 30

# Stable integer keys for sub-seeds. Both card classes share one key so a yellow and a
# red image with the same index are rendered from the same random stream.
_DESIGN_KEYS: dict[DatasetLabel, int] = {
    **{label: i for i, label in enumerate(ClassLabel)},
    ClassLabel.RED_CARD: list(ClassLabel).index(ClassLabel.YELLOW_CARD),
    PoolLabel.OTHER_SOCCER: 20,
    PoolLabel.NON_SOCCER: 21,
}
_SPLIT_KEYS: dict[Split, int] = {split: i for i, split in enumerate(SPLITS)}
_MATCH_STREAM = 99


def sub_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, keys...); equal inputs give equal streams."""
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def _plan(spec: SynthSpec) -> list[ManifestEntry]:
    entries: list[ManifestEntry] = []
    for split in SPLITS:
        for label in (*ClassLabel, *PoolLabel):
            counts = spec.pool_counts if isinstance(label, PoolLabel) else spec.class_counts
            for i in range(counts.for_split(split)):
                entries.append(ManifestEntry(f"{split}/{label}/{i:05d}.png", label, split))
    return entries


def _render_entry(spec: SynthSpec, root: Path, entry: ManifestEntry) -> None:
    index = int(Path(entry.path).stem)
    rng = sub_rng(spec.seed, _SPLIT_KEYS[entry.split], _DESIGN_KEYS[entry.label], index)
    write_image(root / entry.path, render(entry.label, spec, rng))


def generate(spec: SynthSpec, out_dir: str | Path, *, workers: int = 1) -> DatasetManifest:
    """Render the dataset described by `spec` under `out_dir` and write its manifest.

    Images are independent, so `workers > 1` renders them on a thread pool without
    changing a single output byte.
    """
    root = Path(out_dir)
    started = time.perf_counter()
    entries = _plan(spec)
    try:
        root.mkdir(parents=True, exist_ok=True)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda e: _render_entry(spec, root, e), entries))
        else:
            for entry in entries:
                _render_entry(spec, root, entry)
        write_manifest(root, entries)
        (root / SPEC_NAME).write_text(
            json.dumps(spec.model_dump(mode="json"), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise DatasetError("cannot write dataset", str(root)) from exc

    manifest = DatasetManifest(root=root, entries=tuple(entries))
    validate_manifest(manifest, spec)
    logger.info(
        "synthetic dataset generated",
        extra={
            "component": "synth",
            "path": str(root),
            "duration_ms": int((time.perf_counter() - started) * 1000),
        },
    )
    return manifest


def open_dataset(root: str | Path) -> tuple[DatasetManifest, SynthSpec | None]:
    """Read and validate a dataset; its SynthSpec is returned when the dataset carries one."""
    manifest = read_manifest(root)
    spec_path = Path(root) / SPEC_NAME
    spec = None
    if spec_path.is_file():
        try:
            spec = SynthSpec.model_validate_json(spec_path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise DatasetError("invalid synth spec", str(spec_path)) from exc
    validate_manifest(manifest, spec)
    return manifest, spec


def _check_plan(plan: list[PlantedEvent], length: int) -> list[PlantedEvent]:
    ordered = sorted(plan, key=lambda p: p.frame_index)
    half = PLANT_RUN // 2
    for event in ordered:
        if event.kind not in EVENT_CLASSES:
            raise ConfigValidationError(f"{event.kind} is a scene class and cannot be planted")
        if event.frame_index - half < 0 or event.frame_index + half >= length:
            raise ConfigValidationError(
                f"planted {event.kind} at frame {event.frame_index} does not fit in "
                f"{length} frames"
            )
    for prev, cur in zip(ordered, ordered[1:], strict=False):
        if cur.frame_index - prev.frame_index < MIN_PLANT_GAP:
            raise ConfigValidationError(
                f"planted events at frames {prev.frame_index} and {cur.frame_index} overlap; "
                f"keep them at least {MIN_PLANT_GAP} frames apart"
            )
    return ordered


def plant_match(
    spec: SynthSpec,
    plan: list[PlantedEvent],
    length: int,
    out_dir: str | Path,
    *,
    fps: float = 30.0,
) -> PlantedMatch:
    """Write a synthetic match of `length` frames with the planted events.

    Every planted event shows its class imagery on the PLANT_RUN frames centred on its
    frame index; all other frames are other-soccer or non-soccer filler.
    """
    if length < 0:
        raise ConfigValidationError("match length must be non-negative")
    ordered = _check_plan(plan, length)
    half = PLANT_RUN // 2
    planted: dict[int, ClassLabel] = {}
    for event in ordered:
        for i in range(event.frame_index - half, event.frame_index + half + 1):
            planted[i] = event.kind

    root = Path(out_dir)
    picker = sub_rng(spec.seed, _MATCH_STREAM)
    fillers = picker.random(length) < 0.5
    try:
        root.mkdir(parents=True, exist_ok=True)
        lines = []
        for i in range(length):
            label: DatasetLabel = planted.get(i) or (
                PoolLabel.OTHER_SOCCER if fillers[i] else PoolLabel.NON_SOCCER
            )
            rng = sub_rng(spec.seed, _MATCH_STREAM, _DESIGN_KEYS[label], i)
            write_image(root / f"frame_{i:08d}.png", render(label, spec, rng))
            lines.append(f"{i}\t{i / fps:.6f}")
        (root / FRAMES_MANIFEST).write_text(
            "".join(line + "\n" for line in lines), encoding="utf-8"
        )
        (root / GROUND_TRUTH).write_text(
            "".join(f"{e.kind}\t{e.frame_index}\n" for e in ordered), encoding="utf-8"
        )
    except OSError as exc:
        raise DatasetError("cannot write planted match", str(root)) from exc

    logger.info(
        "planted match written",
        extra={"component": "synth", "path": str(root)},
    )
    return PlantedMatch(frames_dir=str(root), length=length, ground_truth=ordered)


def read_ground_truth(path: str | Path) -> list[PlantedEvent]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError("cannot read ground truth", str(path)) from exc
    events = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        try:
            events.append(PlantedEvent(kind=ClassLabel(parts[0]), frame_index=int(parts[1])))
        except (ValueError, IndexError) as exc:
            raise DatasetError(f"malformed ground-truth line {lineno}", str(path)) from exc
    return events
