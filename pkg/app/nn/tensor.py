"""Tensor with tape-free reverse-mode gradients.

Every op builds its result with `Tensor._from_op`, handing over its parents and a
closure mapping the output gradient to one gradient per parent. `backward()` walks
the graph in reverse topological order; accumulation order is fixed by that walk,
so identical inputs always give bit-identical gradients.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from typing import Any

import numpy as np

from app.domain.exceptions import ShapeMismatchError

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data: Any,
        *,
        requires_grad: bool = False,
        dtype: np.dtype | type | str | None = None,
    ):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    @classmethod
    def _from_op(
        cls, data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn
    ) -> Tensor:
        out = cls(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    # *** properties ***

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the data."""
        return self.data.reshape(-1)

    def numel(self) -> int:
        return int(self.data.size)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # *** graph ***

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def _topological_order(self) -> list[Tensor]:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ShapeMismatchError("backward", "scalar", self.shape)
            grad = np.ones_like(self.data)
        pending: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(self._topological_order()):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g), strict=True):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pg if key not in pending else pending[key] + pg

    # *** elementwise arithmetic ***

    def __add__(self, other: Tensor | float) -> Tensor:
        o = _as_tensor(other, self.dtype)
        return Tensor._from_op(
            self.data + o.data,
            (self, o),
            lambda g: (_unbroadcast(g, self.shape), _unbroadcast(g, o.shape)),
        )

    __radd__ = __add__

    def __neg__(self) -> Tensor:
        return Tensor._from_op(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other: Tensor | float) -> Tensor:
        return self + (-_as_tensor(other, self.dtype))

    def __rsub__(self, other: Tensor | float) -> Tensor:
        return _as_tensor(other, self.dtype) + (-self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        o = _as_tensor(other, self.dtype)
        return Tensor._from_op(
            self.data * o.data,
            (self, o),
            lambda g: (_unbroadcast(g * o.data, self.shape), _unbroadcast(g * self.data, o.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other: Tensor | float) -> Tensor:
        o = _as_tensor(other, self.dtype)
        return Tensor._from_op(
            self.data / o.data,
            (self, o),
            lambda g: (
                _unbroadcast(g / o.data, self.shape),
                _unbroadcast(-g * self.data / (o.data * o.data), o.shape),
            ),
        )

    def __rtruediv__(self, other: Tensor | float) -> Tensor:
        return _as_tensor(other, self.dtype) / self

    def __matmul__(self, other: Tensor) -> Tensor:
        if self.ndim != 2 or other.ndim != 2 or self.shape[1] != other.shape[0]:
            raise ShapeMismatchError("matmul", f"(n, {other.shape[0]})", self.shape)
        return Tensor._from_op(
            self.data @ other.data,
            (self, other),
            lambda g: (g @ other.data.T, self.data.T @ g),
        )

    def exp(self) -> Tensor:
        out = np.exp(self.data)
        return Tensor._from_op(out, (self,), lambda g: (g * out,))

    def log(self) -> Tensor:
        return Tensor._from_op(np.log(self.data), (self,), lambda g: (g / self.data,))

    def sqrt(self) -> Tensor:
        out = np.sqrt(self.data)
        return Tensor._from_op(out, (self,), lambda g: (g / (2.0 * out),))

    def square(self) -> Tensor:
        return Tensor._from_op(self.data * self.data, (self,), lambda g: (2.0 * g * self.data,))

    def clip(self, low: float, high: float) -> Tensor:
        inside = (self.data >= low) & (self.data <= high)
        return Tensor._from_op(
            np.clip(self.data, low, high), (self,), lambda g: (np.where(inside, g, 0.0),)
        )

    # *** reductions ***

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(g: np.ndarray) -> tuple[np.ndarray]:
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.shape).copy(),)

        return Tensor._from_op(np.asarray(out), (self,), backward)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        if axis is None:
            count = self.data.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # *** movement ***

    def reshape(self, *shape: int) -> Tensor:
        target = shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape
        return Tensor._from_op(
            self.data.reshape(target), (self,), lambda g: (g.reshape(self.shape),)
        )

    def transpose(self, *axes: int) -> Tensor:
        order = axes or tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(order))
        return Tensor._from_op(
            self.data.transpose(order), (self,), lambda g: (g.transpose(inverse),)
        )

    @property
    def T(self) -> Tensor:  # noqa: N802
        return self.transpose()

    def __getitem__(self, index: Any) -> Tensor:
        def backward(g: np.ndarray) -> tuple[np.ndarray]:
            full = np.zeros_like(self.data)
            np.add.at(full, index, g)
            return (full,)

        return Tensor._from_op(np.asarray(self.data[index]), (self,), backward)

    def astype(self, dtype: np.dtype | type | str) -> Tensor:
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad)


def _as_tensor(value: Tensor | float | np.ndarray, dtype: np.dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0, *sizes])

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return [
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(tensors))
        ]

    return Tensor._from_op(
        np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward
    )


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    def backward(g: np.ndarray) -> list[np.ndarray]:
        return [np.take(g, i, axis=axis) for i in range(len(tensors))]

    return Tensor._from_op(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), backward)
