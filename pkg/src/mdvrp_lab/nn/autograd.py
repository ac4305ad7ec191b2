"""A small reverse-mode autodiff engine on top of numpy (float64 only).

Every op builds a new :class:`Tensor` that remembers its parents and a
closure propagating the output gradient back to them.  Calling
:meth:`Tensor.backward` on a scalar walks the recorded graph once in
reverse topological order.  Inside :func:`no_grad` nothing is recorded,
which is what the greedy/baseline rollouts use.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- construction helpers -------------------------------------------
    @staticmethod
    def _op(data, parents: Sequence["Tensor"], backward) -> "Tensor":
        out = Tensor(data)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def _accum(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + g

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __len__(self):
        return len(self.data)

    # -- backward ----------------------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
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
            for p in node._parents:
                if id(p) not in visited and p.requires_grad:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accum(g)
                continue
            for parent, pg in node._backward(g):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor._op(a.data + b.data, (a, b), lambda g: (
            (a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape))))

    __radd__ = __add__

    def __neg__(self):
        a = self
        return Tensor._op(-a.data, (a,), lambda g: ((a, -g),))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor._op(a.data * b.data, (a, b), lambda g: (
            (a, _unbroadcast(g * b.data, a.shape)),
            (b, _unbroadcast(g * a.data, b.shape))))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor._op(a.data / b.data, (a, b), lambda g: (
            (a, _unbroadcast(g / b.data, a.shape)),
            (b, _unbroadcast(-g * a.data / (b.data ** 2), b.shape))))

    def __pow__(self, p: float):
        a = self
        return Tensor._op(a.data ** p, (a,), lambda g: ((a, g * p * a.data ** (p - 1)),))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        a = self
        out = a.data[idx]

        def back(g):
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            return ((a, full),)
        return Tensor._op(out, (a,), back)

    # -- shape ---------------------------------------------------------------
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        return Tensor._op(a.data.reshape(shape), (a,), lambda g: ((a, g.reshape(a.shape)),))

    def swapaxes(self, i: int, j: int):
        a = self
        return Tensor._op(np.swapaxes(a.data, i, j), (a,),
                          lambda g: ((a, np.swapaxes(g, i, j)),))

    @property
    def T(self):
        return self.swapaxes(-1, -2)

    # -- reductions -------------------------------------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        a = self

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return ((a, np.broadcast_to(g, a.shape).copy()),)
        return Tensor._op(a.data.sum(axis=axis, keepdims=keepdims), (a,), back)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else np.prod(
            [self.shape[ax] for ax in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def max(self, axis: int = -1, keepdims: bool = False):
        """Max along one axis; the gradient goes to the first maximiser."""
        a = self
        idx = np.expand_dims(np.argmax(a.data, axis=axis), axis)
        out = np.take_along_axis(a.data, idx, axis)
        if not keepdims:
            out = np.squeeze(out, axis)

        def back(g):
            if not keepdims:
                g = np.expand_dims(g, axis)
            full = np.zeros_like(a.data)
            np.put_along_axis(full, idx, g, axis)
            return ((a, full),)
        return Tensor._op(out, (a,), back)

    # -- elementwise ------------------------------------------------------------
    def tanh(self):
        a = self
        t = np.tanh(a.data)
        return Tensor._op(t, (a,), lambda g: ((a, g * (1.0 - t * t)),))

    def relu(self):
        a = self
        pos = a.data > 0
        return Tensor._op(np.where(pos, a.data, 0.0), (a,), lambda g: ((a, g * pos),))

    def exp(self):
        a = self
        e = np.exp(a.data)
        return Tensor._op(e, (a,), lambda g: ((a, g * e),))

    def log(self):
        a = self
        return Tensor._op(np.log(a.data), (a,), lambda g: ((a, g / a.data),))


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    return Tensor._op(np.matmul(a.data, b.data), (a, b), lambda g: (
        (a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)),
        (b, _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back(g):
        return tuple(zip(tensors, np.split(g, sizes, axis=axis)))
    return Tensor._op(data, tensors, back)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def back(g):
        return tuple((t, np.take(g, i, axis=axis)) for i, t in enumerate(tensors))
    return Tensor._op(data, tensors, back)


def masked_fill(x: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Entries where ``mask`` is True are replaced by ``value`` (no gradient)."""
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    return Tensor._op(np.where(mask, value, x.data), (x,),
                      lambda g: ((x, np.where(mask, 0.0, g)),))


def _masked_logits(x: np.ndarray, allowed) -> np.ndarray:
    if allowed is None:
        return x
    allowed = np.broadcast_to(np.asarray(allowed, dtype=bool), x.shape)
    return np.where(allowed, x, -np.inf)


def softmax(x: Tensor, axis: int = -1, allowed: np.ndarray | None = None) -> Tensor:
    """Softmax over ``axis``; entries with ``allowed == False`` (or -inf) get exactly 0."""
    x = as_tensor(x)
    z = _masked_logits(x.data, allowed)
    zmax = np.max(z, axis=axis, keepdims=True)
    if not np.all(np.isfinite(zmax)):
        raise ValueError("softmax over a slice with no finite entry")
    e = np.exp(z - zmax)
    p = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return ((x, p * (g - (g * p).sum(axis=axis, keepdims=True))),)
    return Tensor._op(p, (x,), back)


def log_softmax(x: Tensor, axis: int = -1, allowed: np.ndarray | None = None) -> Tensor:
    x = as_tensor(x)
    z = _masked_logits(x.data, allowed)
    zmax = np.max(z, axis=axis, keepdims=True)
    if not np.all(np.isfinite(zmax)):
        raise ValueError("log_softmax over a slice with no finite entry")
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    p = np.exp(out)

    def back(g):
        gz = np.where(np.isfinite(out), g, 0.0)
        return ((x, gz - p * gz.sum(axis=axis, keepdims=True)),)
    return Tensor._op(out, (x,), back)


def parameters_of(tensors: Iterable[Tensor]) -> list[Tensor]:
    return [t for t in tensors if t.requires_grad]
