"""Minimal reverse-mode automatic differentiation over float64 arrays.

Every operation records its parents and a closure producing the local
vector-Jacobian products; ``backward`` walks the graph once in reverse
topological order.  All math runs in float64, which keeps the central
finite-difference checks in the test suite tight.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        vjp: Callable[[np.ndarray], tuple[np.ndarray | None, ...]] | None = None,
    ):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        if self.data.ndim != 0:
            raise ValueError("backward requires a scalar root")
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
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._vjp is None or node.grad is None:
                continue
            for parent, grad in zip(node._parents, node._vjp(node.grad)):
                if grad is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += grad

    # operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)


class Parameter(Tensor):
    """Named trainable leaf; its shape is fixed at creation."""

    __slots__ = ("name", "trainable")

    def __init__(self, name: str, data, trainable: bool = True):
        data = _as_array(data)
        if not np.all(np.isfinite(data)):
            raise ValueError(f"parameter {name!r} has non-finite values")
        super().__init__(data, requires_grad=trainable)
        self.name = name
        self.trainable = trainable

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to the shape of a broadcast operand."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _make(data, parents: Sequence[Tensor], vjp) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=requires, parents=tuple(parents), vjp=vjp if requires else None)


# primitive ops ---------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def vjp(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return _make(out, (a, b), vjp)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data @ b.data

    def vjp(g):
        if a.data.ndim == 1 and b.data.ndim == 2:
            return g @ b.data.T, np.outer(a.data, g)
        if a.data.ndim == 2 and b.data.ndim == 1:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g

    return _make(out, (a, b), vjp)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return _make(out, (x,), vjp)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _make(out, (x,), vjp)


def relu(x) -> Tensor:
    x = as_tensor(x)
    out = np.maximum(x.data, 0.0)

    def vjp(g):
        return (g * (x.data > 0.0),)

    return _make(out, (x,), vjp)


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)

    def vjp(g):
        return (g * out,)

    return _make(out, (x,), vjp)


def log(x) -> Tensor:
    x = as_tensor(x)
    out = np.log(x.data)

    def vjp(g):
        return (g / x.data,)

    return _make(out, (x,), vjp)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _make(out, (x,), vjp)


def tsum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, x.data.shape).copy(),)
        gx = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gx, x.data.shape).copy(),)

    return _make(out, (x,), vjp)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else x.data.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        grads = []
        for i in range(len(tensors)):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(idx)])
        return tuple(grads)

    return _make(out, tensors, vjp)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _make(out, tensors, vjp)


def take(x: Tensor, key) -> Tensor:
    x = as_tensor(x)
    out = x.data[key]

    def vjp(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, key, g)
        return (gx,)

    return _make(out, (x,), vjp)


def rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Embedding lookup: gather rows by integer id."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.intp)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise IndexError("embedding id out of range")
    out = table.data[ids]

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _make(out, (table,), vjp)


def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, n_heads: int) -> tuple[Tensor, np.ndarray]:
    """Scaled dot-product attention over heads split from the feature axis.

    Inputs are (n, d) with d divisible by ``n_heads``; returns the (n, d)
    context and the (heads, n, n) attention probabilities as a plain array.
    Fused into one op: the per-head loop dominated graph overhead otherwise.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    n, d = q.data.shape
    if d % n_heads != 0:
        raise ValueError("feature width must divide evenly into heads")
    dh = d // n_heads
    scale = 1.0 / np.sqrt(dh)

    def split(x):
        return x.reshape(n, n_heads, dh).transpose(1, 0, 2)  # (H, n, dh)

    qh, kh, vh = split(q.data), split(k.data), split(v.data)
    scores = qh @ kh.transpose(0, 2, 1) * scale
    scores -= scores.max(axis=2, keepdims=True)
    e = np.exp(scores)
    probs = e / e.sum(axis=2, keepdims=True)  # (H, n, n)
    out = (probs @ vh).transpose(1, 0, 2).reshape(n, d)

    def vjp(g):
        g_ctx = g.reshape(n, n_heads, dh).transpose(1, 0, 2)
        g_vh = probs.transpose(0, 2, 1) @ g_ctx
        g_probs = g_ctx @ vh.transpose(0, 2, 1)
        inner = (g_probs * probs).sum(axis=2, keepdims=True)
        g_scores = probs * (g_probs - inner) * scale
        g_qh = g_scores @ kh
        g_kh = g_scores.transpose(0, 2, 1) @ qh

        def join(x):
            return x.transpose(1, 0, 2).reshape(n, d)

        return join(g_qh), join(g_kh), join(g_vh)

    return _make(out, (q, k, v), vjp), probs


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-probability of the target class per row."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.intp)
    n = logits.data.shape[0]
    if targets.shape != (n,):
        raise ValueError("one target per logit row required")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = -log_probs[np.arange(n), targets].mean()

    def vjp(g):
        grad = np.exp(log_probs)
        grad[np.arange(n), targets] -= 1.0
        return (g * grad / n,)

    return _make(np.asarray(loss), (logits,), vjp)


def set_rows(x: Tensor, idx: np.ndarray, values: Tensor) -> Tensor:
    """Copy of ``x`` with rows at ``idx`` replaced by ``values``.

    Indices must be unique: a duplicated row would receive the gradient of
    the surviving write only."""
    x, values = as_tensor(x), as_tensor(values)
    idx = np.asarray(idx, dtype=np.intp)
    out = x.data.copy()
    out[idx] = values.data

    def vjp(g):
        gx = g.copy()
        gx[idx] = 0.0
        return gx, g[idx]

    return _make(out, (x, values), vjp)


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    out = x.data.reshape(shape)

    def vjp(g):
        return (g.reshape(x.data.shape),)

    return _make(out, (x,), vjp)


def transpose(x: Tensor) -> Tensor:
    x = as_tensor(x)

    def vjp(g):
        return (g.T,)

    return _make(x.data.T, (x,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise layer normalization with learned gain and bias."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    norm = centered * inv
    out = norm * gain.data + bias.data
    d = x.data.shape[-1]

    def vjp(g):
        gnorm = g * gain.data
        gvar = (gnorm * centered * (-0.5) * inv**3).sum(axis=-1, keepdims=True)
        gmu = (-gnorm * inv).sum(axis=-1, keepdims=True) + gvar * (-2.0 / d) * centered.sum(
            axis=-1, keepdims=True
        )
        gx = gnorm * inv + gvar * 2.0 * centered / d + gmu / d
        ggain = _unbroadcast(g * norm, gain.data.shape)
        gbias = _unbroadcast(g, bias.data.shape)
        return gx, ggain, gbias

    return _make(out, (x, gain, bias), vjp)


def dropout(x: Tensor, rate: float, rng: np.random.Generator, train: bool) -> Tensor:
    """Inverted dropout; identity in evaluation mode."""
    if not train or rate <= 0.0:
        return as_tensor(x)
    x = as_tensor(x)
    keep = 1.0 - rate
    mask = (rng.random(x.data.shape) < keep) / keep
    out = x.data * mask

    def vjp(g):
        return (g * mask,)

    return _make(out, (x,), vjp)


def custom(data, parents: Sequence[Tensor], vjp) -> Tensor:
    """Escape hatch for ops with hand-written gradients (CRF, cross-entropy)."""
    return _make(data, parents, vjp)


def zero_grads(params: Sequence[Parameter]) -> None:
    for p in params:
        p.grad = None
