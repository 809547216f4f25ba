from __future__ import annotations

import math

import numpy as np
from PIL import Image, ImageOps

from app.classifier.labels import ClassLabel
from app.classifier.schemas import AugmentationConfig
from app.synth.schemas import DatasetLabel

_SIDE_SCENES = frozenset({ClassLabel.LEFT_PENALTY_AREA, ClassLabel.RIGHT_PENALTY_AREA})


def flip_allowed(label: DatasetLabel, config: AugmentationConfig) -> bool:
    return config.flip_scene_sides or label not in _SIDE_SCENES


def _border_color(pixels: np.ndarray) -> tuple[int, int, int]:
    border = np.concatenate([pixels[0], pixels[-1], pixels[:, 0], pixels[:, -1]])
    return tuple(int(v) for v in np.median(border, axis=0))  # type: ignore[return-value]


def augment(
    image: np.ndarray,
    label: DatasetLabel,
    rng: np.random.Generator,
    config: AugmentationConfig,
) -> np.ndarray:
    """Random zoom, rotation, shift and (label permitting) horizontal flip of an H x W x 3 image.

    Always draws the same number of random values so the stream stays aligned across
    labels and settings.
    """
    zoom, angle, tx, ty, coin = rng.uniform(-1.0, 1.0, size=5)
    if not config.enabled:
        return image
    pixels = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    h, w = pixels.shape[:2]
    img = Image.fromarray(pixels)

    s = 1.0 + config.scale * zoom
    theta = math.radians(config.rotate_deg * angle)
    shift_x, shift_y = config.shift * tx * w, config.shift * ty * h
    cx, cy = w / 2.0, h / 2.0
    cos, sin = math.cos(theta) / s, math.sin(theta) / s
    # Inverse map: output pixel -> input pixel.
    a, b = cos, sin
    d, e = -sin, cos
    ox, oy = cx + shift_x, cy + shift_y
    c = cx - a * ox - b * oy
    f = cy - d * ox - e * oy
    img = img.transform(
        (w, h),
        Image.Transform.AFFINE,
        (a, b, c, d, e, f),
        resample=Image.Resampling.BILINEAR,
        fillcolor=_border_color(pixels),
    )
    if (coin + 1.0) / 2.0 < config.flip_p and flip_allowed(label, config):
        img = ImageOps.mirror(img)
    return np.asarray(img, dtype=np.float64) / 255.0
