from __future__ import annotations

import zipfile
from pathlib import Path

import numpy as np
import pytest

from app.domain.exceptions import CheckpointError
from app.nn.checkpoint import load_into, read_checkpoint, save_checkpoint
from app.vae.model import build_vae
from app.vae.schemas import VaeConfig


def test_identical_weights_give_identical_bytes(
    tmp_path: Path, tiny_vae_config: VaeConfig
) -> None:
    paths = [
        save_checkpoint(
            build_vae(tiny_vae_config, seed=3),
            tmp_path / f"{name}.ckpt",
            component="vae",
            config=tiny_vae_config,
        )
        for name in ("a", "b")
    ]

    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_round_trip_restores_every_array(tmp_path: Path, tiny_vae_config: VaeConfig) -> None:
    source = build_vae(tiny_vae_config, seed=1)
    path = save_checkpoint(source, tmp_path / "m.ckpt", component="vae", config=tiny_vae_config)

    manifest, arrays = read_checkpoint(path)
    target = load_into(build_vae(tiny_vae_config, seed=2), manifest, arrays)

    assert manifest.component == "vae"
    for (name, want), (_, got) in zip(source.named_layers(), target.named_layers(), strict=True):
        assert np.array_equal(want.weights.data, got.weights.data), name
        assert np.array_equal(want.bias.data, got.bias.data), name


def test_float32_models_keep_their_dtype(tmp_path: Path, tiny_vae_config: VaeConfig) -> None:
    model = build_vae(tiny_vae_config, dtype="float32")
    path = save_checkpoint(model, tmp_path / "m.ckpt", component="vae", config=tiny_vae_config)

    _, arrays = read_checkpoint(path)

    assert all(a.dtype == np.float32 for layer in arrays.values() for a in layer.values())


def test_layer_plan_mismatch_is_refused(tmp_path: Path, tiny_vae_config: VaeConfig) -> None:
    path = save_checkpoint(
        build_vae(tiny_vae_config), tmp_path / "m.ckpt", component="vae", config=tiny_vae_config
    )
    other = build_vae(tiny_vae_config.model_copy(update={"latent_dim": 6}))

    with pytest.raises(CheckpointError):
        load_into(other, *read_checkpoint(path))


def test_corrupt_archive_raises_checkpoint_error(tmp_path: Path) -> None:
    path = tmp_path / "broken.ckpt"
    path.write_bytes(b"not a zip")

    with pytest.raises(CheckpointError):
        read_checkpoint(path)


def test_unknown_format_version_is_refused(tmp_path: Path, tiny_vae_config: VaeConfig) -> None:
    path = save_checkpoint(
        build_vae(tiny_vae_config), tmp_path / "m.ckpt", component="vae", config=tiny_vae_config
    )
    with zipfile.ZipFile(path) as zf:
        entries = {name: zf.read(name) for name in zf.namelist()}
    entries["manifest.json"] = entries["manifest.json"].replace(
        b'"format_version": 1', b'"format_version": 99'
    )
    with zipfile.ZipFile(path, "w") as zf:
        for name, payload in entries.items():
            zf.writestr(name, payload)

    with pytest.raises(CheckpointError):
        read_checkpoint(path)
