"""Reverse-mode automatic differentiation over dense numpy arrays.

Every operation records its parents and a closure that routes the output
gradient back to them; Tensor.backward() walks the recorded graph once in
reverse topological order and accumulates into .grad.  Arrays are float64
by default (float32 passes through untouched for inference use).
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np

__all__ = ["Tensor", "as_tensor"]


def _coerce(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """A dense array plus the bookkeeping needed for reverse-mode gradients."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple["Tensor", ...] = (),
        _backward: Optional[Callable[[np.ndarray], None]] = None,
    ) -> None:
        self.data = _coerce(data)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data, dtype=np.float64)
        self.grad += grad

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate gradients of this tensor w.r.t. every graph input."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data, dtype=np.float64)
        else:
            grad = np.asarray(grad, dtype=np.float64)
            if grad.shape != self.data.shape:
                raise ValueError(f"seed shape {grad.shape} != output shape {self.data.shape}")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.accumulate(g)
            if node._backward is not None:
                node._backward_route(g, grads)

    def _backward_route(self, g: np.ndarray, grads: dict[int, np.ndarray]) -> None:
        contributions = self._backward(g)
        for parent, contrib in zip(self._parents, contributions):
            if contrib is None or not _needs_grad(parent):
                continue
            prev = grads.get(id(parent))
            grads[id(parent)] = contrib if prev is None else prev + contrib

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, as_tensor(other))

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __neg__(self):
        return mul(self, as_tensor(np.array(-1.0)))

    def __sub__(self, other):
        return add(self, -as_tensor(other))

    def __rsub__(self, other):
        return add(as_tensor(other), -self)

    def __truediv__(self, other):
        return div(self, as_tensor(other))

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    def __pow__(self, exponent: float):
        return pow_scalar(self, float(exponent))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes: Sequence[int]):
        return transpose(self, tuple(axes))

    def sum(self, axis=None, keepdims: bool = False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _needs_grad(t: Tensor) -> bool:
    return t.requires_grad or bool(t._parents)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    if any(_needs_grad(p) for p in parents):
        return Tensor(data, _parents=parents, _backward=backward)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over the axes numpy broadcast to reach grad.shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise arithmetic ---------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(out, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.data / b.data

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _make(out, (a, b), backward)


def pow_scalar(a: Tensor, exponent: float) -> Tensor:
    out = a.data**exponent

    def backward(g):
        return (g * exponent * a.data ** (exponent - 1.0),)

    return _make(out, (a,), backward)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return _make(out, (a,), backward)


def expm1(a: Tensor) -> Tensor:
    out = np.expm1(a.data)

    def backward(g):
        return (g * np.exp(a.data),)

    return _make(out, (a,), backward)


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)

    def backward(g):
        return (g / a.data,)

    return _make(out, (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)

    def backward(g):
        return (g * 0.5 / out,)

    return _make(out, (a,), backward)


def phi1(a: Tensor) -> Tensor:
    """expm1(z)/z extended continuously through z = 0."""
    z = a.data
    out = np.where(z == 0.0, 1.0, np.expm1(z) / np.where(z == 0.0, 1.0, z))

    def backward(g):
        # d/dz (e^z - 1)/z = (z e^z - (e^z - 1)) / z^2, -> 1/2 at z = 0
        num = z * np.exp(z) - np.expm1(z)
        dz = np.where(z == 0.0, 0.5, num / np.where(z == 0.0, 1.0, z * z))
        return (g * dz,)

    return _make(out, (a,), backward)


# -- shape manipulation ---------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    out = a.data.reshape(shape)

    def backward(g):
        return (g.reshape(a.shape),)

    return _make(out, (a,), backward)


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    out = np.ascontiguousarray(a.data.transpose(axes))
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (g.transpose(inverse),)

    return _make(out, (a,), backward)


def flip(a: Tensor, axis: int) -> Tensor:
    out = np.flip(a.data, axis=axis).copy()

    def backward(g):
        return (np.flip(g, axis=axis),)

    return _make(out, (a,), backward)


def repeat_axis(a: Tensor, repeats: int, axis: int) -> Tensor:
    """Nearest-neighbor upsampling along one axis."""
    if repeats < 1:
        raise ValueError(f"repeats must be positive, got {repeats}")
    out = np.repeat(a.data, repeats, axis=axis)

    def backward(g):
        shape = list(a.shape)
        shape[axis:axis + 1] = [shape[axis], repeats]
        return (g.reshape(shape).sum(axis=axis + 1),)

    return _make(out, (a,), backward)


# -- reductions -----------------------------------------------------------


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        g_exp = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g_exp, a.shape).copy(),)

    return _make(out, (a,), backward)


def tensor_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return tensor_sum(a, axis=axis, keepdims=keepdims) * as_tensor(np.array(1.0 / count))


# -- linear algebra ---------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-d operands, got {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _make(out, (a, b), backward)


# -- indexing ----------------------------------------------------------------


def gather_pairs(a: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """a[rows[i], cols[i]] for a 2-d tensor; backward scatter-adds."""
    if a.ndim != 2:
        raise ValueError(f"gather_pairs expects a 2-d tensor, got {a.shape}")
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    out = a.data[rows, cols]

    def backward(g):
        ga = np.zeros_like(a.data, dtype=np.float64)
        np.add.at(ga, (rows, cols), g)
        return (ga,)

    return _make(out, (a,), backward)
