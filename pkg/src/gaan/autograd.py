"""Dense float64 tensors with tape-based reverse-mode differentiation.

Only the handful of operations the model needs are provided. Every op
records its parents and a closure mapping the output gradient to parent
gradients; :meth:`Tensor.backward` replays the tape in reverse topological
order.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _tanh_backward(out, grad):
    return grad * (1.0 - out * out)


def _sigmoid(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self):
        return transpose(self)

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __len__(self):
        return self.data.shape[0]

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            grad = np.ones_like(self.data)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take_rows(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return tsum(self, axis, keepdims) * (1.0 / count)

    def tanh(self):
        return tanh(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _needs(*ts):
    return any(t.requires_grad for t in ts)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor(out, _needs(a, b), (a, b), backward)


def neg(a):
    return Tensor(-a.data, a.requires_grad, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor(a.data * b.data, _needs(a, b), (a, b), backward)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def backward(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * out / b.data, b.shape))

    return Tensor(out, _needs(a, b), (a, b), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor(a.data @ b.data, _needs(a, b), (a, b), backward)


def spmm(S, x):
    """Sparse (constant) matrix times dense tensor."""
    x = as_tensor(x)
    if not sp.isspmatrix_csr(S):
        S = sp.csr_matrix(S)

    def backward(g):
        return (np.asarray(S.T @ g),)

    return Tensor(np.asarray(S @ x.data), x.requires_grad, (x,), backward)


def transpose(a):
    return Tensor(a.data.T, a.requires_grad, (a,), lambda g: (g.T,))


def reshape(a, shape):
    old = a.shape
    return Tensor(a.data.reshape(shape), a.requires_grad, (a,), lambda g: (g.reshape(old),))


def tsum(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor(out, a.requires_grad, (a,), backward)


def tanh(a):
    out = np.tanh(a.data)
    return Tensor(out, a.requires_grad, (a,), lambda g: (_tanh_backward(out, g),))


def sqrt(a):
    out = np.sqrt(a.data)
    return Tensor(out, a.requires_grad, (a,), lambda g: (g * 0.5 / out,))


def softplus(a):
    """``log(1 + exp(a))`` evaluated without overflow."""
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return Tensor(out, a.requires_grad, (a,), lambda g: (g * _sigmoid(x),))


def clamp(a, lo, hi):
    inside = (a.data >= lo) & (a.data <= hi)
    return Tensor(np.clip(a.data, lo, hi), a.requires_grad, (a,), lambda g: (g * inside,))


def take_rows(a, idx):
    idx = np.asarray(idx, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return Tensor(a.data[idx], a.requires_grad, (a,), backward)


def concat_rows(parts, width=None):
    """Stack 2-D tensors vertically; ``width`` covers the empty-list case."""
    if not parts:
        return Tensor(np.zeros((0, width or 0)))
    sizes = [p.shape[0] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return Tensor(np.concatenate([p.data for p in parts], axis=0), _needs(*parts), tuple(parts), backward)


def where_mask(a, mask):
    """Zero out entries where ``mask`` is False (constant mask)."""
    mask = np.asarray(mask, dtype=bool)
    return Tensor(np.where(mask, a.data, 0.0), a.requires_grad, (a,), lambda g: (np.where(mask, g, 0.0),))
