"""Procedural renderers for the ten classes and the two no-highlight pools.

Coordinates are fractions of the image side so designs scale with `image_size`.
The visual design of each class is documented in CLASS_DESIGNS.md next to this file.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

from app.classifier.labels import CardColor, ClassLabel, PoolLabel
from app.synth.schemas import RGB, DatasetLabel, SynthSpec

GRASS: RGB = (46, 139, 64)
GRASS_LIGHT: RGB = (60, 158, 76)
LINE: RGB = (235, 235, 235)
TEAM_A: RGB = (30, 60, 190)
TEAM_B: RGB = (110, 40, 130)
REFEREE: RGB = (20, 20, 20)
BALL: RGB = (250, 250, 250)
FLAG: RGB = (250, 130, 20)
BOARD: RGB = (25, 25, 25)
BOARD_DIGIT: RGB = (80, 230, 120)

Box = tuple[int, int, int, int]  # y0, y1, x0, x1 (half-open, pixels)


class Canvas:
    """Float RGB canvas in [0, 255] with fractional-coordinate drawing primitives."""

    def __init__(self, size: int):
        self.size = size
        self.pixels = np.zeros((size, size, 3), dtype=np.float64)
        centers = (np.arange(size) + 0.5) / size
        self.ys, self.xs = np.meshgrid(centers, centers, indexing="ij")

    def fill(self, color: RGB) -> None:
        self.pixels[...] = color

    def paint(self, mask: np.ndarray, color: RGB) -> None:
        self.pixels[mask] = color

    def stripes(self, phase: float, width: float = 0.125) -> None:
        bands = np.floor((self.ys + phase) / width).astype(int) % 2 == 1
        self.paint(bands, GRASS_LIGHT)

    def rect(self, x0: float, y0: float, x1: float, y1: float, color: RGB) -> None:
        self.paint((self.xs >= x0) & (self.xs < x1) & (self.ys >= y0) & (self.ys < y1), color)

    def rect_outline(
        self, x0: float, y0: float, x1: float, y1: float, color: RGB, t: float = 0.025
    ) -> None:
        outer = (self.xs >= x0) & (self.xs < x1) & (self.ys >= y0) & (self.ys < y1)
        inner = (self.xs >= x0 + t) & (self.xs < x1 - t) & (self.ys >= y0 + t) & (self.ys < y1 - t)
        self.paint(outer & ~inner, color)

    def ellipse(self, cx: float, cy: float, rx: float, ry: float, color: RGB) -> None:
        self.paint(((self.xs - cx) / rx) ** 2 + ((self.ys - cy) / ry) ** 2 <= 1.0, color)

    def ring(
        self,
        cx: float,
        cy: float,
        r: float,
        color: RGB,
        t: float = 0.025,
        where: np.ndarray | None = None,
    ) -> None:
        d = np.hypot(self.xs - cx, self.ys - cy)
        mask = np.abs(d - r) <= t / 2
        self.paint(mask if where is None else mask & where, color)

    def line(
        self, x0: float, y0: float, x1: float, y1: float, color: RGB, t: float = 0.025
    ) -> None:
        dx, dy = x1 - x0, y1 - y0
        length_sq = dx * dx + dy * dy or 1e-12
        proj = np.clip(((self.xs - x0) * dx + (self.ys - y0) * dy) / length_sq, 0.0, 1.0)
        dist = np.hypot(self.xs - (x0 + proj * dx), self.ys - (y0 + proj * dy))
        self.paint(dist <= t / 2, color)

    def box(self, x0: float, y0: float, x1: float, y1: float) -> Box:
        s = self.size
        return (int(round(y0 * s)), int(round(y1 * s)), int(round(x0 * s)), int(round(x1 * s)))

    def add_noise(self, rng: np.random.Generator, level: float) -> None:
        if level > 0:
            self.pixels += rng.normal(0.0, level * 255.0, size=self.pixels.shape)

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.rint(self.pixels), 0, 255).astype(np.uint8)


def _pitch(size: int, rng: np.random.Generator) -> tuple[Canvas, float, float]:
    canvas = Canvas(size)
    canvas.fill(GRASS)
    canvas.stripes(phase=float(rng.uniform(0.0, 0.25)))
    dx, dy = (float(v) for v in rng.uniform(-0.05, 0.05, size=2))
    return canvas, dx, dy


def _player(c: Canvas, x: float, y: float, color: RGB, scale: float = 1.0) -> None:
    c.ellipse(x, y, 0.045 * scale, 0.09 * scale, color)
    c.ellipse(x, y - 0.11 * scale, 0.03 * scale, 0.03 * scale, (225, 180, 150))


def _penalty_kick(c: Canvas, rng: np.random.Generator, dx: float, dy: float) -> None:
    c.rect_outline(0.3 + dx, 0.04 + dy, 0.7 + dx, 0.2 + dy, LINE)
    _player(c, 0.5 + dx + float(rng.uniform(-0.05, 0.05)), 0.14 + dy, TEAM_B, 0.8)
    c.ellipse(0.5 + dx, 0.55 + dy, 0.02, 0.02, BALL)
    _player(c, 0.5 + dx, 0.75 + dy, TEAM_A)


def _corner_kick(c: Canvas, rng: np.random.Generator, dx: float, dy: float) -> None:
    c.line(0.04, 0.0, 0.04, 1.0, LINE)
    c.line(0.0, 0.96, 1.0, 0.96, LINE)
    corner = (c.xs >= 0.04) & (c.ys <= 0.96)
    c.ring(0.04, 0.96, 0.15, LINE, where=corner)
    c.line(0.06, 0.94, 0.06, 0.62, FLAG, t=0.02)
    c.rect(0.06, 0.62, 0.14, 0.68, FLAG)
    c.ellipse(0.14 + dx / 2, 0.86 + dy / 2, 0.02, 0.02, BALL)
    _player(c, 0.28 + dx, 0.75 + dy, TEAM_A)
    _player(c, 0.62 + dx + float(rng.uniform(-0.05, 0.05)), 0.45 + dy, TEAM_B, 0.8)


def _free_kick(c: Canvas, rng: np.random.Generator, dx: float, dy: float) -> None:
    for i in range(4):
        _player(c, 0.32 + 0.12 * i + dx, 0.42 + dy, TEAM_B, 0.85)
    c.ellipse(0.5 + dx + float(rng.uniform(-0.04, 0.04)), 0.72 + dy, 0.02, 0.02, BALL)
    _player(c, 0.6 + dx, 0.86 + dy, TEAM_A, 0.9)


def _tackle(c: Canvas, rng: np.random.Generator, dx: float, dy: float) -> None:
    _player(c, 0.44 + dx, 0.52 + dy, TEAM_A, 1.5)
    lean = float(rng.uniform(0.06, 0.1))
    c.ellipse(0.5 + lean + dx, 0.62 + dy, 0.13, 0.06, TEAM_B)
    c.ellipse(0.5 + dx, 0.74 + dy, 0.025, 0.025, BALL)


def _to_substitute(c: Canvas, rng: np.random.Generator, dx: float, dy: float) -> None:
    c.rect(0.28 + dx, 0.16 + dy, 0.72 + dx, 0.44 + dy, BOARD)
    digits = rng.integers(0, 2, size=2)
    for i, tall in enumerate(digits):
        x = 0.36 + 0.2 * i + dx
        c.rect(x, 0.21 + dy, x + 0.05, (0.39 if tall else 0.31) + dy, BOARD_DIGIT)
        c.rect(x + 0.06, 0.21 + dy, x + 0.1, 0.39 + dy, BOARD_DIGIT)
    _player(c, 0.3 + dx, 0.72 + dy, TEAM_A)
    _player(c, 0.7 + dx, 0.72 + dy, TEAM_A)


def _card_scene(
    c: Canvas, rng: np.random.Generator, dx: float, dy: float, patch: tuple[float, float]
) -> Box:
    _player(c, 0.5 + dx, 0.62 + dy, REFEREE, 1.4)
    tip_x = 0.64 + dx + float(rng.uniform(-0.03, 0.03))
    tip_y = 0.3 + dy + float(rng.uniform(-0.03, 0.03))
    c.line(0.52 + dx, 0.5 + dy, tip_x, tip_y, REFEREE, t=0.03)
    _player(c, 0.22 + dx, 0.7 + dy, TEAM_A)
    _player(c, 0.8 + dx, 0.68 + dy, TEAM_B)
    w, h = patch
    return c.box(tip_x - w / 2, tip_y - h, tip_x + w / 2, tip_y)


def _center_circle(c: Canvas, rng: np.random.Generator, dx: float, dy: float) -> None:
    c.line(0.5 + dx, 0.0, 0.5 + dx, 1.0, LINE)
    c.ring(0.5 + dx, 0.5 + dy, 0.28 + float(rng.uniform(-0.02, 0.02)), LINE)
    c.ellipse(0.5 + dx, 0.5 + dy, 0.02, 0.02, LINE)


def _left_penalty_area(c: Canvas, rng: np.random.Generator, dx: float, dy: float) -> None:
    c.line(0.02, 0.0, 0.02, 1.0, LINE)
    c.rect_outline(-0.1, 0.15 + dy, 0.36 + dx, 0.85 + dy, LINE)
    c.rect_outline(-0.1, 0.35 + dy, 0.14 + dx, 0.65 + dy, LINE)
    c.ring(0.26 + dx, 0.5 + dy, 0.18, LINE, where=c.xs > 0.36 + dx)
    c.ellipse(0.25 + dx, 0.5 + dy, 0.015, 0.015, LINE)
    if rng.uniform() < 0.5:
        _player(c, 0.55 + dx, 0.5 + dy, TEAM_A, 0.7)


Renderer = Callable[[Canvas, np.random.Generator, float, float], None]

_RENDERERS: dict[ClassLabel, Renderer] = {
    ClassLabel.PENALTY_KICK: _penalty_kick,
    ClassLabel.CORNER_KICK: _corner_kick,
    ClassLabel.FREE_KICK: _free_kick,
    ClassLabel.TACKLE: _tackle,
    ClassLabel.TO_SUBSTITUTE: _to_substitute,
    ClassLabel.CENTER_CIRCLE: _center_circle,
    ClassLabel.LEFT_PENALTY_AREA: _left_penalty_area,
}


def render_card(
    spec: SynthSpec, rng: np.random.Generator, color: CardColor
) -> tuple[np.ndarray, Box]:
    """Render a card scene; returns the image and the patch box (y0, y1, x0, x1).

    The random stream never depends on `color`, so a yellow and a red card drawn from
    equal generators differ only inside the patch.
    """
    canvas, dx, dy = _pitch(spec.image_size, rng)
    box = _card_scene(canvas, rng, dx, dy, spec.card_patch_size)
    canvas.add_noise(rng, spec.noise_level)
    y0, y1, x0, x1 = box
    canvas.pixels[max(y0, 0) : y1, max(x0, 0) : x1] = (
        spec.yellow_rgb if color is CardColor.YELLOW else spec.red_rgb
    )
    return canvas.to_uint8(), box


def _other_soccer(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    canvas, _, _ = _pitch(spec.image_size, rng)
    for _ in range(int(rng.integers(2, 6))):
        x, y = (float(v) for v in rng.uniform(0.1, 0.9, size=2))
        team = TEAM_A if rng.uniform() < 0.5 else TEAM_B
        _player(canvas, x, y, team, float(rng.uniform(0.5, 1.0)))
    if rng.uniform() < 0.5:
        x0, y0, x1, y1 = (float(v) for v in rng.uniform(0.0, 1.0, size=4))
        canvas.line(x0, y0, x1, y1, LINE)
    canvas.add_noise(rng, spec.noise_level)
    return canvas.to_uint8()


def _non_soccer(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    canvas = Canvas(spec.image_size)
    # Hues kept away from grass green.
    start, end = rng.uniform(0, 255, size=(2, 3))
    start[1] = min(start[1], 90.0)
    end[1] = min(end[1], 90.0)
    angle = float(rng.uniform(0.0, np.pi))
    t = np.clip(np.cos(angle) * canvas.xs + np.sin(angle) * canvas.ys, 0.0, 1.0)[..., None]
    canvas.pixels[...] = (1.0 - t) * start + t * end
    for _ in range(int(rng.integers(1, 4))):
        x0, y0 = (float(v) for v in rng.uniform(0.0, 0.8, size=2))
        w, h = (float(v) for v in rng.uniform(0.1, 0.4, size=2))
        color = tuple(int(v) for v in rng.integers(0, 256, size=3))
        canvas.rect(x0, y0, x0 + w, y0 + h, color)  # type: ignore[arg-type]
    canvas.add_noise(rng, max(spec.noise_level, 0.08))
    return canvas.to_uint8()


def render(label: DatasetLabel, spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Render one H x W x 3 uint8 image of `label`."""
    if label is ClassLabel.YELLOW_CARD:
        return render_card(spec, rng, CardColor.YELLOW)[0]
    if label is ClassLabel.RED_CARD:
        return render_card(spec, rng, CardColor.RED)[0]
    if label is ClassLabel.RIGHT_PENALTY_AREA:
        return np.ascontiguousarray(render(ClassLabel.LEFT_PENALTY_AREA, spec, rng)[:, ::-1])
    if label is PoolLabel.OTHER_SOCCER:
        return _other_soccer(spec, rng)
    if label is PoolLabel.NON_SOCCER:
        return _non_soccer(spec, rng)
    canvas, dx, dy = _pitch(spec.image_size, rng)
    _RENDERERS[label](canvas, rng, dx, dy)  # type: ignore[index]
    canvas.add_noise(rng, spec.noise_level)
    return canvas.to_uint8()
