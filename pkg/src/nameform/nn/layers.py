"""Differentiable building blocks for the sequence labelers.

Token inputs are represented as word embedding rows concatenated with a
three-bit letter-case vector.  The recurrent encoder is a bidirectional
LSTM; the context encoder is a small multi-head self-attention stack with
sinusoidal positions.  Co-attention produces one importance weight per
position from two hidden sequences; gated fusion blends each sequence with
its attention-rescaled counterpart through a learned sigmoid gate.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import autograd as ag
from .autograd import Parameter, Tensor


def case_vector(token: str) -> np.ndarray:
    """Three binary cues: first alpha uppercase, all alpha uppercase, any uppercase."""
    alphas = [c for c in token if c.isalpha()]
    first_upper = bool(alphas) and alphas[0].isupper()
    all_upper = bool(alphas) and all(c.isupper() for c in alphas)
    any_upper = any(c.isupper() for c in token)
    return np.array([first_upper, all_upper, any_upper], dtype=np.float64)


def case_matrix(tokens: Sequence[str]) -> np.ndarray:
    if not tokens:
        return np.zeros((0, 3))
    return np.stack([case_vector(t) for t in tokens])


def uniform_init(rng: np.random.Generator, shape, scale: float = 0.1) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


def glorot_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear:
    def __init__(self, name: str, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Parameter(f"{name}.weight", glorot_init(rng, d_in, d_out))
        self.bias = Parameter(f"{name}.bias", np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out

    def parameters(self) -> list[Parameter]:
        return [self.weight] + ([self.bias] if self.bias is not None else [])


class Embedding:
    """Seeded uniform(-0.1, 0.1) trainable lookup table."""

    def __init__(self, name: str, n_rows: int, dim: int, rng: np.random.Generator):
        self.table = Parameter(name, uniform_init(rng, (n_rows, dim)))
        self.dim = dim

    def __call__(self, ids: np.ndarray) -> Tensor:
        return ag.rows(self.table, ids)

    def parameters(self) -> list[Parameter]:
        return [self.table]


class TokenRepresentation:
    """Word embedding row concatenated with the letter-case bits."""

    def __init__(self, name: str, n_rows: int, dim: int, rng: np.random.Generator):
        self.embedding = Embedding(f"{name}.table", n_rows, dim, rng)
        self.dim = dim + 3

    def __call__(self, ids: np.ndarray, case_bits: np.ndarray) -> Tensor:
        ids = np.asarray(ids)
        if case_bits.shape != (len(ids), 3):
            raise ValueError("case bits must be n x 3")
        return ag.concat([self.embedding(ids), Tensor(case_bits)], axis=1)

    def parameters(self) -> list[Parameter]:
        return self.embedding.parameters()


class LstmCell:
    """Standard LSTM cell: forget/input/output gates and tanh candidate."""

    def __init__(self, name: str, d_in: int, hidden: int, rng: np.random.Generator):
        self.hidden = hidden
        self.w_x = Parameter(f"{name}.w_x", glorot_init(rng, d_in, 4 * hidden))
        self.w_h = Parameter(f"{name}.w_h", glorot_init(rng, hidden, 4 * hidden))
        bias = np.zeros(4 * hidden)
        bias[hidden : 2 * hidden] = 1.0  # positive forget-gate bias
        self.bias = Parameter(f"{name}.bias", bias)

    def run(self, x: Tensor) -> Tensor:
        """States after each position, stacked to (n, hidden)."""
        n = x.shape[0]
        h_dim = self.hidden
        projected = x @ self.w_x
        h = Tensor(np.zeros(h_dim))
        c = Tensor(np.zeros(h_dim))
        states = []
        for t in range(n):
            z = projected[t] + (h @ self.w_h) + self.bias
            i_gate = ag.sigmoid(z[0:h_dim])
            f_gate = ag.sigmoid(z[h_dim : 2 * h_dim])
            candidate = ag.tanh(z[2 * h_dim : 3 * h_dim])
            o_gate = ag.sigmoid(z[3 * h_dim : 4 * h_dim])
            c = f_gate * c + i_gate * candidate
            h = o_gate * ag.tanh(c)
            states.append(h)
        return ag.stack(states)

    def parameters(self) -> list[Parameter]:
        return [self.w_x, self.w_h, self.bias]


class BiRnnEncoder:
    """Concatenated forward and backward recurrent states, (n, 2*hidden)."""

    def __init__(self, name: str, d_in: int, hidden: int, rng: np.random.Generator):
        self.fwd = LstmCell(f"{name}.fwd", d_in, hidden, rng)
        self.bwd = LstmCell(f"{name}.bwd", d_in, hidden, rng)
        self.out_dim = 2 * hidden

    def __call__(self, x: Tensor) -> Tensor:
        n = x.shape[0]
        reverse = np.arange(n)[::-1].copy()
        forward_states = self.fwd.run(x)
        backward_states = self.bwd.run(ag.take(x, reverse))
        return ag.concat([forward_states, ag.take(backward_states, reverse)], axis=1)

    def parameters(self) -> list[Parameter]:
        return self.fwd.parameters() + self.bwd.parameters()


class CoAttention:
    """One importance weight per position, computed from both hidden sequences.

    The joint map concatenates linear views of the two sequences, squashes
    with tanh, projects to a scalar per position, and normalizes across
    positions.  In ``shared`` mode the same distribution rescales both
    sequences; ``per_view`` mode derives a second distribution from its own
    parameter set.
    """

    def __init__(
        self,
        name: str,
        d: int,
        k: int | None = None,
        rng: np.random.Generator | None = None,
        mode: str = "shared",
    ):
        if mode not in ("shared", "per_view"):
            raise ValueError(f"unknown co-attention mode: {mode}")
        rng = rng if rng is not None else np.random.default_rng(0)
        k = k if k is not None else d
        self.mode = mode
        self.w_own = Parameter(f"{name}.w_own", glorot_init(rng, d, k))
        self.w_other = Parameter(f"{name}.w_other", glorot_init(rng, d, k))
        self.b_other = Parameter(f"{name}.b_other", np.zeros(k))
        self.w_score = Parameter(f"{name}.w_score", glorot_init(rng, 2 * k, 1))
        self.b_score = Parameter(f"{name}.b_score", np.zeros(1))
        if mode == "per_view":
            self.w_own2 = Parameter(f"{name}.w_own2", glorot_init(rng, d, k))
            self.w_other2 = Parameter(f"{name}.w_other2", glorot_init(rng, d, k))
            self.b_other2 = Parameter(f"{name}.b_other2", np.zeros(k))
            self.w_score2 = Parameter(f"{name}.w_score2", glorot_init(rng, 2 * k, 1))
            self.b_score2 = Parameter(f"{name}.b_score2", np.zeros(1))

    def _weights(self, h, h_other, w_own, w_other, b_other, w_score, b_score) -> Tensor:
        joint = ag.tanh(ag.concat([h @ w_own, h_other @ w_other + b_other], axis=1))
        return ag.softmax(joint @ w_score + b_score, axis=0)

    def __call__(self, h: Tensor, h_prime: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        if h.shape[0] != h_prime.shape[0]:
            raise ValueError("co-attention inputs must share the position count")
        weights = self._weights(
            h, h_prime, self.w_own, self.w_other, self.b_other, self.w_score, self.b_score
        )
        if self.mode == "shared":
            weights_prime = weights
        else:
            weights_prime = self._weights(
                h_prime, h, self.w_own2, self.w_other2, self.b_other2, self.w_score2, self.b_score2
            )
        return weights, weights * h, weights_prime * h_prime

    def parameters(self) -> list[Parameter]:
        params = [self.w_own, self.w_other, self.b_other, self.w_score, self.b_score]
        if self.mode == "per_view":
            params += [self.w_own2, self.w_other2, self.b_other2, self.w_score2, self.b_score2]
        return params


class GatedFusion:
    """Sigmoid-gated blend of a sequence with its attention-rescaled view."""

    def __init__(self, name: str, d: int, d_out: int | None = None, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        d_out = d_out if d_out is not None else d
        self.w_tilde = Parameter(f"{name}.w_tilde", glorot_init(rng, d, d_out))
        self.b_tilde = Parameter(f"{name}.b_tilde", np.zeros(d_out))
        self.w_own = Parameter(f"{name}.w_own", glorot_init(rng, d, d_out))
        self.b_own = Parameter(f"{name}.b_own", np.zeros(d_out))
        self.w_gate = Parameter(f"{name}.w_gate", glorot_init(rng, 2 * d_out, d_out))
        self.out_dim = d_out

    def __call__(self, h: Tensor, h_tilde: Tensor) -> Tensor:
        if h.shape != h_tilde.shape:
            raise ValueError("gated fusion inputs must share a shape")
        t_tilde = ag.tanh(h_tilde @ self.w_tilde + self.b_tilde)
        t_own = ag.tanh(h @ self.w_own + self.b_own)
        gate = ag.sigmoid(ag.concat([t_tilde, t_own], axis=1) @ self.w_gate)
        return gate * t_own + (1.0 - gate) * t_tilde

    def parameters(self) -> list[Parameter]:
        return [self.w_tilde, self.b_tilde, self.w_own, self.b_own, self.w_gate]


def sinusoidal_positions(max_len: int, dim: int) -> np.ndarray:
    positions = np.arange(max_len)[:, None].astype(np.float64)
    freqs = np.exp(-math.log(10000.0) * (np.arange(0, dim, 2) / dim))
    table = np.zeros((max_len, dim))
    table[:, 0::2] = np.sin(positions * freqs)
    table[:, 1::2] = np.cos(positions * freqs[: dim // 2])
    return table


class TransformerLayer:
    def __init__(self, name: str, d: int, n_heads: int, rng: np.random.Generator):
        if d % n_heads != 0:
            raise ValueError("model width must divide evenly into heads")
        self.d = d
        self.n_heads = n_heads
        self.head_dim = d // n_heads
        self.w_q = Parameter(f"{name}.w_q", glorot_init(rng, d, d))
        self.w_k = Parameter(f"{name}.w_k", glorot_init(rng, d, d))
        self.w_v = Parameter(f"{name}.w_v", glorot_init(rng, d, d))
        self.w_o = Parameter(f"{name}.w_o", glorot_init(rng, d, d))
        self.b_o = Parameter(f"{name}.b_o", np.zeros(d))
        self.ln1_gain = Parameter(f"{name}.ln1_gain", np.ones(d))
        self.ln1_bias = Parameter(f"{name}.ln1_bias", np.zeros(d))
        self.ffn1 = Linear(f"{name}.ffn1", d, 4 * d, rng)
        self.ffn2 = Linear(f"{name}.ffn2", 4 * d, d, rng)
        self.ln2_gain = Parameter(f"{name}.ln2_gain", np.ones(d))
        self.ln2_bias = Parameter(f"{name}.ln2_bias", np.zeros(d))
        self.last_attention: np.ndarray | None = None

    def __call__(self, x: Tensor) -> Tensor:
        # pre-norm residual blocks: near-identity at initialization, which
        # keeps iterated re-encoding of the same block well-conditioned
        normed = ag.layer_norm(x, self.ln1_gain, self.ln1_bias)
        attended, probs = ag.multi_head_attention(
            normed @ self.w_q, normed @ self.w_k, normed @ self.w_v, self.n_heads
        )
        self.last_attention = probs
        x = x + (attended @ self.w_o + self.b_o)
        hidden = ag.layer_norm(x, self.ln2_gain, self.ln2_bias)
        return x + self.ffn2(ag.relu(self.ffn1(hidden)))

    def parameters(self) -> list[Parameter]:
        return (
            [self.w_q, self.w_k, self.w_v, self.w_o, self.b_o, self.ln1_gain, self.ln1_bias]
            + self.ffn1.parameters()
            + self.ffn2.parameters()
            + [self.ln2_gain, self.ln2_bias]
        )


class TransformerEncoder:
    """Self-attention context encoder; output shape equals input shape."""

    def __init__(
        self,
        name: str,
        d: int,
        n_layers: int = 2,
        n_heads: int = 4,
        max_len: int = 512,
        rng: np.random.Generator | None = None,
        add_positions: bool = True,
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d = d
        self.max_len = max_len
        self.add_positions = add_positions
        self.positions = sinusoidal_positions(max_len, d)
        self.layers = [TransformerLayer(f"{name}.layer{i}", d, n_heads, rng) for i in range(n_layers)]

    def __call__(self, x: Tensor) -> Tensor:
        """Contextualize a block.

        ``add_positions=False`` callers inject position encodings into the
        blocks themselves, which keeps repeated re-encoding of the same
        block from accumulating the position table.
        """
        n = x.shape[0]
        if n > self.max_len:
            raise ValueError(f"sequence length {n} exceeds capacity {self.max_len}")
        out = x + Tensor(self.positions[:n]) if self.add_positions else x
        for layer in self.layers:
            out = layer(out)
        return out

    @property
    def last_attention(self) -> list[np.ndarray]:
        return [layer.last_attention for layer in self.layers]

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]
