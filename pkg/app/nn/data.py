"""Batch helpers shared by every trainer: image-to-tensor conversion and minibatch plans."""

from __future__ import annotations

from collections.abc import Iterator, Sequence

import numpy as np
from PIL import Image

from app.domain.exceptions import ShapeMismatchError


def resize_image(image: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize of an H x W x 3 image in [0, 1]; unchanged if already `size` square."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeMismatchError("resize_image", "(H, W, 3)", image.shape)
    if image.shape[0] == size and image.shape[1] == size:
        return image
    as_bytes = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    resized = Image.fromarray(as_bytes).resize((size, size), Image.Resampling.BILINEAR)
    return np.asarray(resized, dtype=np.float64) / 255.0


def to_batch(
    images: Sequence[np.ndarray], size: int, dtype: np.dtype | str = "float64"
) -> np.ndarray:
    """Stack H x W x 3 images into a B x 3 x size x size array."""
    if not images:
        return np.zeros((0, 3, size, size), dtype=dtype)
    stacked = np.stack([resize_image(img, size) for img in images])
    return np.ascontiguousarray(stacked.transpose(0, 3, 1, 2), dtype=dtype)


def minibatches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Shuffled index batches covering 0..n-1 once; the last batch may be short."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def paired_minibatches(
    labels: Sequence[int], batch_size: int, rng: np.random.Generator
) -> Iterator[np.ndarray]:
    """Shuffled batches that hold at least two samples of every class present.

    Each class is shuffled and cut into pairs; pairs are dealt round-robin so a batch of
    `batch_size` gets an even share of every class.
    """
    labels_arr = np.asarray(labels)
    classes = np.unique(labels_arr)
    pairs_per_class = []
    for c in classes:
        idx = rng.permutation(np.flatnonzero(labels_arr == c))
        usable = len(idx) - len(idx) % 2
        pairs_per_class.append(idx[:usable].reshape(-1, 2))
    fewest = min(len(p) for p in pairs_per_class)
    per_batch = max(1, min(batch_size // (2 * len(classes)), fewest))
    rounds = fewest // per_batch
    for r in range(rounds):
        chunk = [p[r * per_batch : (r + 1) * per_batch].reshape(-1) for p in pairs_per_class]
        yield rng.permutation(np.concatenate(chunk))
