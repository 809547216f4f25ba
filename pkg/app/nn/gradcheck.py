from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from app.domain.exceptions import ShapeMismatchError
from app.nn.tensor import Tensor

CoordinateFilter = Callable[[int, tuple[int, ...]], bool]


@dataclass(frozen=True)
class GradCheckReport:
    passed: bool
    max_rel_error: float
    checked: int
    tolerance: float


def projection_loss(out: Tensor, seed: int = 0) -> Tensor:
    """Reduce an op output to a scalar with fixed random weights so every element matters."""
    weights = np.random.default_rng(seed).standard_normal(out.shape)
    return (out * Tensor(weights)).sum()


def grad_check(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    *,
    coords: int = 8,
    tolerance: float = 1e-4,
    step: float = 1e-6,
    seed: int = 0,
    accept: CoordinateFilter | None = None,
    floor: float = 1e-3,
) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar `fn()` to central differences.

    `fn` must rebuild its graph from `inputs` on every call; `inputs` are perturbed in
    place. `accept(input_index, coordinate)` can veto coordinates (e.g. near a ReLU kink).
    Relative errors are taken against max(|analytic|, |numeric|, floor) so coordinates
    with vanishing gradients are judged on absolute error.
    """
    for t in inputs:
        if t.dtype != np.float64:
            raise ShapeMismatchError("grad_check", "float64 inputs", t.shape)
        t.requires_grad = True
        t.zero_grad()

    loss = fn()
    loss.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in inputs]

    rng = np.random.default_rng(seed)
    candidates = [
        (i, tuple(int(c) for c in np.unravel_index(flat, t.shape)))
        for i, t in enumerate(inputs)
        for flat in range(t.numel())
    ]
    if accept is not None:
        candidates = [c for c in candidates if accept(*c)]
    picks = rng.choice(len(candidates), size=min(coords, len(candidates)), replace=False)

    worst = 0.0
    for pick in sorted(int(p) for p in picks):
        i, coord = candidates[pick]
        data = inputs[i].data
        original = data[coord]
        data[coord] = original + step
        plus = fn().item()
        data[coord] = original - step
        minus = fn().item()
        data[coord] = original
        numeric = (plus - minus) / (2.0 * step)
        exact = float(analytic[i][coord])
        denom = max(abs(exact), abs(numeric), floor)
        worst = max(worst, abs(exact - numeric) / denom)

    return GradCheckReport(
        passed=worst < tolerance,
        max_rel_error=worst,
        checked=len(picks),
        tolerance=tolerance,
    )
