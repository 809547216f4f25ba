from __future__ import annotations

import numpy as np
import pytest

from app.domain.exceptions import NonFiniteGradientError, ShapeMismatchError
from app.nn.optim import Adam, OptimizerState, adam_step
from app.nn.tensor import Tensor


def test_first_step_moves_each_weight_by_lr() -> None:
    # With bias correction the first update is lr * g / |g|.
    p = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    state = OptimizerState(lr=0.1)

    adam_step([p], [np.array([0.5, -4.0, 1e-2])], state)

    assert p.data == pytest.approx([0.9, -1.9, 2.9], abs=1e-6)
    assert state.step == 1


def test_missing_gradient_counts_as_zero() -> None:
    p = Tensor(np.ones(2), requires_grad=True)

    adam_step([p], [None], OptimizerState())

    assert np.array_equal(p.data, np.ones(2))


def test_non_finite_gradient_is_refused_before_any_update() -> None:
    a = Tensor(np.ones(2), requires_grad=True)
    b = Tensor(np.ones(2), requires_grad=True)
    state = OptimizerState()

    with pytest.raises(NonFiniteGradientError):
        adam_step([a, b], [np.ones(2), np.array([np.nan, 0.0])], state)

    assert np.array_equal(a.data, np.ones(2))
    assert state.step == 0


def test_gradient_shape_must_match() -> None:
    with pytest.raises(ShapeMismatchError):
        adam_step([Tensor(np.ones(2))], [np.ones(3)], OptimizerState())


def test_adam_minimizes_a_quadratic() -> None:
    target = np.array([3.0, -1.0])
    x = Tensor(np.zeros(2), requires_grad=True)
    opt = Adam([x], lr=0.1)

    for _ in range(500):
        opt.zero_grad()
        ((x - Tensor(target)).square().sum()).backward()
        opt.step()

    assert x.data == pytest.approx(target, abs=1e-2)
