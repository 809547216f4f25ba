from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from app.domain.exceptions import NonFiniteGradientError, ShapeMismatchError
from app.nn.tensor import Tensor


@dataclass
class OptimizerState:
    """Adam moments and hyperparameters; defaults are the canonical Adam values."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray | None],
    state: OptimizerState,
) -> tuple[Sequence[Tensor], OptimizerState]:
    """One bias-corrected Adam update, applied in place to `params`.

    A missing gradient (None) counts as zero.
    """
    if len(params) != len(grads):
        raise ShapeMismatchError("adam_step", (len(params),), (len(grads),))
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]

    resolved: list[np.ndarray] = []
    for p, g in zip(params, grads, strict=True):
        g = np.zeros_like(p.data) if g is None else g
        if g.shape != p.data.shape:
            raise ShapeMismatchError("adam_step", p.data.shape, g.shape)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError("adam_step received a non-finite gradient")
        resolved.append(g)

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.step
    correction2 = 1.0 - b2**state.step
    for i, (p, g) in enumerate(zip(params, resolved, strict=True)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        p.data -= (state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(p.dtype)
    return params, state


class Adam:
    """Stateful wrapper binding an `OptimizerState` to a parameter list."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, **kwargs: float):
        self.params = list(params)
        self.state = OptimizerState(lr=lr, **kwargs)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.params, [p.grad for p in self.params], self.state)
