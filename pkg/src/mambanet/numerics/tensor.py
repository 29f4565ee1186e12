"""Tensors and a tape-based reverse-mode differentiator.

Operations only record themselves while a :class:`GradientTape` is active and
at least one input requires a gradient, so inference and frozen sub-networks
run with zero bookkeeping.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ContractError, DimensionError, NonFiniteError

__all__ = [
    "Tensor", "Parameter", "GradientTape", "backward",
    "add", "sub", "mul", "neg", "linear", "matmul", "relu", "sigmoid", "tanh",
    "log", "square", "clip", "sum", "mean", "reshape", "transpose", "getitem", "concat", "stack",
    "conv1d", "bce_loss", "mse_loss",
]


class Tensor:
    """A float64 array, optionally tracked for differentiation."""

    __slots__ = ("data", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim and 0 in arr.shape:
            raise DimensionError(f"tensor dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"non-finite value in tensor {name or ''} of shape {arr.shape}".strip())
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        # op outputs: arrays are already float64; still reject NaN/Inf
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"operation produced non-finite values (shape {arr.shape})")
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = False
        t.name = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __getitem__(self, index):
        return getitem(self, index)


class Parameter(Tensor):
    """A named, learnable tensor. ``trainable=False`` freezes it."""

    __slots__ = ()

    def __init__(self, data, name: str | None = None, trainable: bool = True):
        super().__init__(data, requires_grad=trainable, name=name)

    @property
    def trainable(self) -> bool:
        return self.requires_grad

    @trainable.setter
    def trainable(self, value: bool):
        self.requires_grad = bool(value)


_TAPES: list["GradientTape"] = []


class GradientTape:
    """Records differentiable operations executed inside a ``with`` block."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple, Callable]] = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(arr: np.ndarray, parents: tuple, grad_fn: Callable) -> Tensor:
    out = Tensor._wrap(arr)
    if _TAPES and any(p.requires_grad for p in parents):
        out.requires_grad = True
        _TAPES[-1].nodes.append((out, parents, grad_fn))
    return out


def backward(tape: GradientTape, loss: Tensor,
             params: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Replay ``tape`` in reverse from scalar ``loss``.

    Returns a mapping from each trainable parameter to its gradient. Parameters
    listed in ``params`` that the loss does not reach get zeros; frozen ones
    never appear.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    produced = {id(node[0]) for node in tape.nodes}
    leaves: dict[int, Tensor] = {}
    for out, parents, grad_fn in reversed(tape.nodes):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for parent, pg in zip(parents, grad_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
            if key not in produced:
                leaves[key] = parent
    result: dict[Tensor, np.ndarray] = {}
    for key, p in leaves.items():
        g = grads[key]
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for parameter {p.name!r}")
        result[p] = g
    if params is not None:
        for p in params:
            if p.requires_grad and p not in result:
                result[p] = np.zeros_like(p.data)
    return result


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _emit(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _emit(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _emit(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def neg(a) -> Tensor:
    return _emit(-a.data, (a,), lambda g: (-g,))


def square(a) -> Tensor:
    return _emit(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shapes {a.shape} and {b.shape} do not align")
    return _emit(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` over the last axis of ``x``; weight is out x in."""
    if x.shape[-1] != weight.shape[1]:
        raise DimensionError(
            f"input shape {x.shape} does not match weight shape {weight.shape} (expects last dim {weight.shape[1]})")
    y = x.data @ weight.data.T
    if bias is not None:
        y = y + bias.data

    def grad_fn(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = g @ weight.data if x.requires_grad else None
        gw = g2.T @ x.data.reshape(-1, x.shape[-1]) if weight.requires_grad else None
        gb = g2.sum(axis=0) if bias is not None and bias.requires_grad else None
        return gx, gw, gb

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return _emit(y, parents, grad_fn)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _emit(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)
    return _emit(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _emit(t, (a,), lambda g: (g * (1.0 - t * t),))


def log(a: Tensor) -> Tensor:
    if (a.data <= 0).any():
        raise NonFiniteError("log of non-positive value")
    return _emit(np.log(a.data), (a,), lambda g: (g / a.data,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only where the input was inside the range."""
    inside = (a.data >= lo) & (a.data <= hi)
    return _emit(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


def sum(a: Tensor, axis=None) -> Tensor:  # noqa: A001
    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _emit(np.asarray(a.data.sum(axis=axis)), (a,), grad_fn)


def mean(a: Tensor, axis=None) -> Tensor:
    n = a.data.size if axis is None else a.shape[axis]

    def grad_fn(g):
        if axis is None:
            return (np.full(a.shape, float(g) / n),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape) / n,)

    return _emit(np.asarray(a.data.mean(axis=axis)), (a,), grad_fn)


def reshape(a: Tensor, shape) -> Tensor:
    return _emit(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes) -> Tensor:
    inverse = np.argsort(axes)
    return _emit(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def getitem(a: Tensor, index) -> Tensor:
    def grad_fn(g):
        full = np.zeros_like(a.data)
        if _fancy(index):
            np.add.at(full, index, g)
        else:
            full[index] = g
        return (full,)

    return _emit(np.array(a.data[index]), (a,), grad_fn)


def _fancy(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    ax = axis % tensors[0].data.ndim
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _emit(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), grad_fn)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]

    def grad_fn(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _emit(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), grad_fn)


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Valid cross-correlation of x (batch, channels, length) with weight (filters, channels, kernel)."""
    b_, c, length = x.shape
    f, wc, k = weight.shape
    if c != wc:
        raise DimensionError(f"input channels {c} (shape {x.shape}) != weight channels {wc} (shape {weight.shape})")
    windows = sliding_window_view(x.data, k, axis=2)  # (b, c, L', k)
    y = np.einsum("bclk,fck->bfl", windows, weight.data, optimize=True)
    if bias is not None:
        y = y + bias.data[None, :, None]

    def grad_fn(g):
        gx = gw = gb = None
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            out_len = g.shape[2]
            for j in range(k):
                gx[:, :, j:j + out_len] += np.einsum("fc,bfl->bcl", weight.data[:, :, j], g, optimize=True)
        if weight.requires_grad:
            gw = np.einsum("bclk,bfl->fck", windows, g, optimize=True)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2))
        return gx, gw, gb

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return _emit(y, parents, grad_fn)


def bce_loss(pred: Tensor, target, eps: float = 1e-7) -> Tensor:
    """Mean binary cross-entropy with predictions clamped to [eps, 1 - eps]."""
    t = np.asarray(target, dtype=np.float64).reshape(pred.shape)
    p = clip(pred, eps, 1.0 - eps)
    losses = -(mul(log(p), t) + mul(log(1.0 - p), 1.0 - t))
    return mean(losses)


def mse_loss(pred: Tensor, target) -> Tensor:
    t = np.asarray(target, dtype=np.float64).reshape(pred.shape)
    return mean(square(pred - t))
