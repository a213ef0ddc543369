"""A tiny reverse-mode differentiation engine over dense float64 arrays.

Only the operations the message-passing model needs are provided. Sparse
operands (propagation and bipartite matrices) are always constants, so the
gradient of ``A @ x`` with respect to ``x`` is ``A.T @ g``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class NonFiniteError(FloatingPointError):
    """A forward value became NaN or infinite."""

    def __init__(self, where: str):
        self.where = where
        super().__init__(f"non-finite values produced in {where}")


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad", "name")

    def __init__(self, value, parents=(), backward_fn=None, requires_grad=False, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, name={self.name!r})"

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every reachable leaf.

        ``self`` must be a scalar.
        """
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node.backward_fn is not None and node.grad is not None:
                grads = node.backward_fn(node.grad)
                for p, g in zip(node.parents, grads):
                    if g is None or not p.requires_grad:
                        continue
                    p.grad = g if p.grad is None else p.grad + g


def parameter(value, name=None) -> Tensor:
    return Tensor(value, requires_grad=True, name=name)


def constant(value) -> Tensor:
    return Tensor(value)


def linear(x: Tensor, w: Tensor) -> Tensor:
    """``x @ w.T`` (rows of ``x`` are samples, ``w`` is ``out x in``)."""
    out = x.value @ w.value.T

    def back(g):
        return g @ w.value, g.T @ x.value

    return Tensor(out, (x, w), back)


def _transpose(a):
    """CSR transpose of a constant operator, computed once and kept on ``a``."""
    if not sp.issparse(a):
        return a.T
    at = getattr(a, "_csr_transpose", None)
    if at is None:
        at = a.T.tocsr()
        a._csr_transpose = at
    return at


def sparse_linear(a, w: Tensor) -> Tensor:
    """``a @ w.T`` for a constant (sparse or dense) matrix ``a``."""
    out = np.asarray(a @ w.value.T)

    def back(g):
        return (np.asarray((_transpose(a) @ g).T),)

    return Tensor(out, (w,), back)


def spmm(a, x: Tensor) -> Tensor:
    """``a @ x`` for a constant sparse matrix ``a``."""
    out = np.asarray(a @ x.value)

    def back(g):
        return (np.asarray(_transpose(a) @ g),)

    return Tensor(out, (x,), back)


def add(a: Tensor, b: Tensor) -> Tensor:
    def back(g):
        return g, g

    return Tensor(a.value + b.value, (a, b), back)


def outer(col: np.ndarray, w: Tensor) -> Tensor:
    """``col[:, None] * w.ravel()[None, :]`` for a constant column ``col``."""
    col = np.asarray(col, dtype=np.float64).reshape(-1, 1)
    shape = w.value.shape
    out = col @ w.value.reshape(1, -1)

    def back(g):
        return ((col.T @ g).reshape(shape),)

    return Tensor(out, (w,), back)


def relu(x: Tensor) -> Tensor:
    mask = x.value > 0

    def back(g):
        return (g * mask,)

    return Tensor(x.value * mask, (x,), back)


def scale(x: Tensor, factor: np.ndarray) -> Tensor:
    """Elementwise product with a constant (used for dropout masks)."""

    def back(g):
        return (g * factor,)

    return Tensor(x.value * factor, (x,), back)


def log_softmax(x: Tensor) -> Tensor:
    z = x.value - x.value.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = z - lse
    soft = np.exp(out)

    def back(g):
        return (g - soft * g.sum(axis=1, keepdims=True),)

    return Tensor(out, (x,), back)


def weighted_nll(logp: Tensor, labels: np.ndarray, sample_weight: np.ndarray) -> Tensor:
    """``-sum_i w_i logp[i, y_i] / sum_i w_i`` over rows with ``w_i > 0``."""
    total = sample_weight.sum()
    if total <= 0:
        raise ValueError("empty loss mask")
    rows = np.arange(len(labels))
    picked = logp.value[rows, labels]
    loss = -np.dot(sample_weight, picked) / total

    def back(g):
        grad = np.zeros_like(logp.value)
        grad[rows, labels] = -sample_weight / total
        return (grad * g,)

    return Tensor(loss, (logp,), back)


def check_finite(x: Tensor, where: str) -> Tensor:
    if not np.all(np.isfinite(x.value)):
        raise NonFiniteError(where)
    return x
