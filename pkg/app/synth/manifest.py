"""Dataset manifest: `path<TAB>class<TAB>split` lines relative to the dataset root."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from app.classifier.labels import ClassLabel, PoolLabel, parse_label
from app.domain.exceptions import DatasetError, LabelError
from app.synth.schemas import SPLITS, DatasetLabel, LabeledImage, ManifestEntry, Split, SynthSpec

MANIFEST_NAME = "manifest.txt"
SPEC_NAME = "synth_spec.json"


def safe_join(root: Path, relative: str) -> Path:
    """Resolve `relative` under `root`, refusing paths that escape it."""
    base = root.resolve()
    candidate = (base / relative).resolve()
    if base == candidate or base in candidate.parents:
        return candidate
    raise DatasetError("manifest path escapes the dataset root", relative)


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    entries: tuple[ManifestEntry, ...]

    def for_split(
        self, split: Split, labels: Iterable[DatasetLabel] | None = None
    ) -> list[ManifestEntry]:
        wanted = None if labels is None else set(labels)
        return [
            e for e in self.entries if e.split == split and (wanted is None or e.label in wanted)
        ]

    def counts(self) -> Counter[tuple[DatasetLabel, Split]]:
        return Counter((e.label, e.split) for e in self.entries)

    def path_of(self, entry: ManifestEntry) -> Path:
        return safe_join(self.root, entry.path)


def write_manifest(root: Path, entries: Iterable[ManifestEntry]) -> Path:
    lines = [f"{e.path}\t{e.label}\t{e.split}" for e in entries]
    path = root / MANIFEST_NAME
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


def read_manifest(root: str | Path) -> DatasetManifest:
    root = Path(root)
    path = root / MANIFEST_NAME
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError("cannot read manifest", str(path)) from exc

    entries: list[ManifestEntry] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3 or parts[2] not in SPLITS:
            raise DatasetError(f"malformed manifest line {lineno}", str(path))
        try:
            label = parse_label(parts[1])
        except LabelError as exc:
            raise DatasetError(f"manifest line {lineno}: {exc.message}", str(path)) from exc
        split: Split = parts[2]  # type: ignore[assignment]
        entries.append(ManifestEntry(path=parts[0], label=label, split=split))
    return DatasetManifest(root=root, entries=tuple(entries))


def validate_manifest(manifest: DatasetManifest, spec: SynthSpec | None = None) -> None:
    """Check that files exist, splits are disjoint and, given a spec, counts match it."""
    seen: dict[str, Split] = {}
    for entry in manifest.entries:
        if entry.path in seen:
            raise DatasetError(
                f"listed twice (splits {seen[entry.path]}, {entry.split})", entry.path
            )
        seen[entry.path] = entry.split
        if not manifest.path_of(entry).is_file():
            raise DatasetError("listed file is missing", entry.path)
    if spec is None:
        return
    counts = manifest.counts()
    for split in SPLITS:
        for label in ClassLabel:
            expected = spec.class_counts.for_split(split)
            if counts[(label, split)] != expected:
                raise DatasetError(
                    f"{label}/{split}: {counts[(label, split)]} images, spec says {expected}"
                )
        for pool in PoolLabel:
            expected = spec.pool_counts.for_split(split)
            if counts[(pool, split)] != expected:
                raise DatasetError(
                    f"{pool}/{split}: {counts[(pool, split)]} images, spec says {expected}"
                )


def read_image(path: Path) -> np.ndarray:
    """Decode an RGB image into H x W x 3 float64 in [0, 1]."""
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    except (OSError, UnidentifiedImageError) as exc:
        raise DatasetError("cannot decode image", str(path)) from exc
    return arr / 255.0


def write_image(path: Path, pixels: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path, format="PNG")


def load(
    manifest: DatasetManifest,
    split: Split,
    *,
    labels: Iterable[DatasetLabel] | None = None,
    shuffle_seed: int | None = None,
) -> Iterator[LabeledImage]:
    """Stream the images of one split in manifest order, or in a seeded shuffle."""
    entries = manifest.for_split(split, labels)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(entries))
        entries = [entries[i] for i in order]
    for entry in entries:
        image = read_image(manifest.path_of(entry))
        yield LabeledImage(image=image, label=entry.label, path=entry.path)


def load_arrays(
    manifest: DatasetManifest,
    split: Split,
    *,
    labels: Iterable[DatasetLabel] | None = None,
) -> tuple[list[np.ndarray], list[DatasetLabel]]:
    items = list(load(manifest, split, labels=labels))
    return [item.image for item in items], [item.label for item in items]
