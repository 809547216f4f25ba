"""Frame-sequence ingestion: `frame_%08d.png` (or `.ppm`) files plus an optional `frames.txt`."""

from __future__ import annotations

import re
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from app.domain.exceptions import DatasetError, FrameOrderError
from app.synth.manifest import read_image
from app.synth.service import FRAMES_MANIFEST

FRAME_SUFFIXES = (".png", ".ppm")
_FRAME_NAME = re.compile(r"^frame_(\d{8})\.(png|ppm)$")


@dataclass(frozen=True)
class FrameRecord:
    index: int
    path: Path
    timestamp_s: float | None = None


def frame_path(frames_dir: Path, index: int) -> Path:
    for suffix in FRAME_SUFFIXES:
        candidate = frames_dir / f"frame_{index:08d}{suffix}"
        if candidate.is_file():
            return candidate
    raise DatasetError(f"frame {index} is listed but missing", str(frames_dir))


def _from_manifest(frames_dir: Path, manifest: Path) -> list[FrameRecord]:
    records: list[FrameRecord] = []
    for lineno, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        try:
            index = int(parts[0])
            timestamp = float(parts[1]) if len(parts) > 1 else None
        except ValueError as exc:
            raise DatasetError(f"malformed line {lineno}", str(manifest)) from exc
        if index < 0:
            raise DatasetError(f"negative frame index on line {lineno}", str(manifest))
        records.append(FrameRecord(index, frame_path(frames_dir, index), timestamp))
    return records


def _from_listing(frames_dir: Path) -> list[FrameRecord]:
    records = []
    for path in frames_dir.iterdir():
        match = _FRAME_NAME.match(path.name)
        if match:
            records.append(FrameRecord(int(match.group(1)), path))
    return sorted(records, key=lambda r: r.index)


def list_frames(frames_dir: str | Path) -> list[FrameRecord]:
    """Frames in arrival order: manifest order if `frames.txt` exists, else by file index.

    Manifest order is checked, never repaired.
    """
    root = Path(frames_dir)
    if not root.is_dir():
        raise DatasetError("frame directory not found", str(root))
    manifest = root / FRAMES_MANIFEST
    records = _from_manifest(root, manifest) if manifest.is_file() else _from_listing(root)
    for prev, cur in zip(records, records[1:], strict=False):
        if cur.index <= prev.index:
            raise FrameOrderError(cur.index, prev.index)
    return records


def iter_frames(frames_dir: str | Path) -> Iterator[tuple[int, np.ndarray]]:
    for record in list_frames(frames_dir):
        yield record.index, read_image(record.path)
