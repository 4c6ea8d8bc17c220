"""A small reverse-mode autodiff core over 2-D float64 arrays.

Every value is a 2-D matrix. Operations record their parents and a closure
that pushes the output gradient back; ``backward`` walks the graph in
reverse topological order.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ShapeError
from . import kernels


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 _parents: Sequence["Tensor"] = (), _backward: Optional[Callable] = None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {data.shape}")
        self.data = data
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = tuple(_parents)
        self._backward = _backward

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor({self.rows}x{self.cols})"

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _needs(*ts: Tensor) -> bool:
    return any(t.requires_grad for t in ts)


def _out(data, parents, backward) -> Tensor:
    if _needs(*parents):
        return Tensor(data, True, parents, backward)
    return Tensor(data)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError(f"matmul {a.shape} @ {b.shape}")

    def back(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)
    return _out(a.data @ b.data, (a, b), back)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may be a single row broadcast over ``a``."""
    if b.shape != a.shape and not (b.rows == 1 and b.cols == a.cols):
        raise ShapeError(f"add {a.shape} + {b.shape}")

    def back(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g if b.shape == a.shape else g.sum(axis=0, keepdims=True))
    return _out(a.data + b.data, (a, b), back)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def back(g):
        a._accumulate(g * mask)
    return _out(a.data * mask, (a,), back)


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    factor = np.where(a.data > 0, 1.0, slope)

    def back(g):
        a._accumulate(g * factor)
    return _out(a.data * factor, (a,), back)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.rows != b.rows:
        raise ShapeError(f"concat {a.shape} | {b.shape}")
    split = a.cols

    def back(g):
        if a.requires_grad:
            a._accumulate(g[:, :split])
        if b.requires_grad:
            b._accumulate(g[:, split:])
    return _out(np.concatenate([a.data, b.data], axis=1), (a, b), back)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    def back(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        a._accumulate(full)
    return _out(a.data[start:stop], (a,), back)


def gather_rows(a: Tensor, index: np.ndarray) -> Tensor:
    """out[e] = a[index[e]]."""
    index = np.asarray(index, dtype=np.int64)

    def back(g):
        a._accumulate(kernels.scatter_add(g, index, a.rows))
    return _out(a.data[index], (a,), back)


def scatter_rows(a: Tensor, index: np.ndarray, n: int) -> Tensor:
    """out[r] = sum of a[e] over e with index[e] == r."""
    index = np.asarray(index, dtype=np.int64)
    if len(index) != a.rows:
        raise ShapeError(f"scatter index length {len(index)} != rows {a.rows}")

    def back(g):
        a._accumulate(g[index])
    return _out(kernels.scatter_add(a.data, index, n), (a,), back)


def scale_rows(a: Tensor, factor: np.ndarray) -> Tensor:
    """Multiply row i by the constant factor[i]."""
    factor = np.asarray(factor, dtype=np.float64).reshape(-1, 1)

    def back(g):
        a._accumulate(g * factor)
    return _out(a.data * factor, (a,), back)


def mul_col(a: Tensor, w: Tensor) -> Tensor:
    """Multiply row i of ``a`` by the scalar w[i, 0]."""
    if w.cols != 1 or w.rows != a.rows:
        raise ShapeError(f"mul_col {a.shape} * {w.shape}")

    def back(g):
        if a.requires_grad:
            a._accumulate(g * w.data)
        if w.requires_grad:
            w._accumulate((g * a.data).sum(axis=1, keepdims=True))
    return _out(a.data * w.data, (a, w), back)


def segment_softmax(e: Tensor, index: np.ndarray, n: int) -> Tensor:
    """Softmax of the column vector ``e`` within groups sharing index[i]."""
    index = np.asarray(index, dtype=np.int64)
    if e.cols != 1 or len(index) != e.rows:
        raise ShapeError(f"segment_softmax over {e.shape} with {len(index)} indices")
    flat = e.data[:, 0]
    peak = kernels.segment_max(flat, index, n)
    z = np.exp(flat - peak[index])
    denom = kernels.scatter_add(z.reshape(-1, 1), index, n)[:, 0]
    alpha = (z / denom[index]).reshape(-1, 1)

    def back(g):
        weighted = kernels.scatter_add(g * alpha, index, n)
        e._accumulate(alpha * (g - weighted[index]))
    return _out(alpha, (e,), back)


def dropout(a: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    if p <= 0.0:
        return a
    keep = (rng.random(a.shape) >= p) / (1.0 - p)

    def back(g):
        a._accumulate(g * keep)
    return _out(a.data * keep, (a,), back)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of row-wise softmax against integer labels, as a 1x1 tensor."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != logits.rows:
        raise ShapeError(f"{len(labels)} labels for {logits.rows} rows")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_norm
    rows = np.arange(len(labels))
    loss = -log_p[rows, labels].mean()

    def back(g):
        grad = np.exp(log_p)
        grad[rows, labels] -= 1.0
        logits._accumulate(g[0, 0] * grad / len(labels))
    return _out(np.array([[loss]]), (logits,), back)


def log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
