"""Versioned model checkpoint container.

A checkpoint is a zip archive with fixed entry timestamps (so identical weights give
identical bytes) holding:

- `manifest.json`: format version, component, model config, and per layer its kind,
  hyperparameters and array records (file, shape, little-endian dtype);
- `manifest.txt`: human-readable layer order and shapes;
- `layers/<name>/<array>.bin`: raw little-endian arrays.
"""

from __future__ import annotations

import dataclasses
import json
import zipfile
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from app.domain.exceptions import CheckpointError
from app.nn.layers import LayerKind, LayerParams, Module
from app.nn.tensor import Tensor

CHECKPOINT_FORMAT_VERSION = 1
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)
_ARRAY_FIELDS = ("weights", "bias", "running_mean", "running_var")

StoredDtype = Literal["<f4", "<f8"]


class ArrayRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    file: str
    shape: list[int]
    dtype: StoredDtype


class LayerRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    kind: LayerKind
    hyper: dict[str, Any]
    arrays: dict[str, ArrayRecord]


class CheckpointManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int
    component: str
    config: dict[str, Any]
    layers: list[LayerRecord]
    metadata: dict[str, Any] = {}


def _write_entry(zf: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, payload)


def _stored_dtype(arr: np.ndarray) -> StoredDtype:
    return "<f4" if arr.dtype == np.float32 else "<f8"


def save_checkpoint(
    model: Module,
    path: str | Path,
    *,
    component: str,
    config: BaseModel,
    metadata: dict[str, Any] | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records: list[LayerRecord] = []
    blobs: list[tuple[str, bytes]] = []
    text_lines: list[str] = []

    for name, layer in model.named_layers():
        arrays: dict[str, ArrayRecord] = {}
        for field in _ARRAY_FIELDS:
            tensor: Tensor | None = getattr(layer, field)
            if tensor is None:
                continue
            dtype = _stored_dtype(tensor.data)
            file = f"layers/{name}/{field}.bin"
            arrays[field] = ArrayRecord(file=file, shape=list(tensor.shape), dtype=dtype)
            blobs.append((file, np.ascontiguousarray(tensor.data, dtype=dtype).tobytes()))
        records.append(
            LayerRecord(
                name=name,
                kind=layer.kind,
                hyper=dataclasses.asdict(layer.hyper),
                arrays=arrays,
            )
        )
        text_lines.append(f"{name}\t{layer.kind}\t{'x'.join(map(str, layer.weights.shape))}")

    manifest = CheckpointManifest(
        format_version=CHECKPOINT_FORMAT_VERSION,
        component=component,
        config=config.model_dump(mode="json"),
        layers=records,
        metadata=metadata or {},
    )
    manifest_json = json.dumps(manifest.model_dump(mode="json"), sort_keys=True, indent=2)

    with zipfile.ZipFile(path, "w") as zf:
        _write_entry(zf, "manifest.json", manifest_json.encode("utf-8"))
        _write_entry(zf, "manifest.txt", ("\n".join(text_lines) + "\n").encode("utf-8"))
        for file, payload in blobs:
            _write_entry(zf, file, payload)
    return path


def read_checkpoint(
    path: str | Path,
) -> tuple[CheckpointManifest, dict[str, dict[str, np.ndarray]]]:
    path = Path(path)
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = CheckpointManifest.model_validate_json(zf.read("manifest.json"))
            if manifest.format_version != CHECKPOINT_FORMAT_VERSION:
                raise CheckpointError(
                    f"unsupported checkpoint format {manifest.format_version}", str(path)
                )
            arrays: dict[str, dict[str, np.ndarray]] = {}
            for record in manifest.layers:
                arrays[record.name] = {
                    field: np.frombuffer(zf.read(rec.file), dtype=rec.dtype)
                    .reshape(rec.shape)
                    .astype(rec.dtype.replace("<", ""))
                    for field, rec in record.arrays.items()
                }
    except (OSError, KeyError, zipfile.BadZipFile, ValidationError, ValueError) as exc:
        raise CheckpointError("unreadable checkpoint", str(path)) from exc
    return manifest, arrays


def load_into(
    model: Module,
    manifest: CheckpointManifest,
    arrays: dict[str, dict[str, np.ndarray]],
) -> Module:
    """Copy checkpoint arrays into `model`, which must have the same layer plan."""
    names = [name for name, _ in model.named_layers()]
    stored = [record.name for record in manifest.layers]
    if names != stored:
        raise CheckpointError(f"layer plan mismatch: model {names} vs checkpoint {stored}")
    for record in manifest.layers:
        layer: LayerParams = model.layers[record.name]
        if layer.kind is not record.kind:
            raise CheckpointError(f"layer {record.name}: kind {layer.kind} vs {record.kind}")
        for field, arr in arrays[record.name].items():
            current: Tensor | None = getattr(layer, field)
            if current is None or current.shape != arr.shape:
                raise CheckpointError(f"layer {record.name}: {field} shape mismatch")
            setattr(layer, field, Tensor(arr.copy(), requires_grad=current.requires_grad))
        layer.validate()
    return model
