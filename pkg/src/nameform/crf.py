"""Exact linear-chain CRF in log space.

Scores are emission plus transition potentials with virtual start and stop
states appended after the real classes; the partition function comes from
the forward algorithm, decoding from Viterbi, and gradients from
forward-backward expected counts.  All arithmetic is float64 regardless of
what the upstream network uses, which keeps the partition function stable
for potentials up to the tested magnitudes.
"""
from __future__ import annotations

import numpy as np

from .nn import autograd as ag
from .nn.autograd import Parameter, Tensor
from .nn.layers import Linear


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = a.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def _check(emissions: np.ndarray, transitions: np.ndarray, labels=None) -> int:
    n, c = emissions.shape
    if transitions.shape != (c + 2, c + 2):
        raise ValueError("transition matrix must be (classes + 2) square")
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ValueError("label sequence length mismatch")
        if labels.size and (labels.min() < 0 or labels.max() >= c):
            raise ValueError("label out of range")
    return c


def sequence_score(emissions: np.ndarray, transitions: np.ndarray, labels) -> float:
    c = _check(emissions, transitions, labels)
    start, stop = c, c + 1
    labels = np.asarray(labels)
    score = transitions[start, labels[0]] + transitions[labels[-1], stop]
    score += emissions[np.arange(len(labels)), labels].sum()
    score += transitions[labels[:-1], labels[1:]].sum()
    return float(score)


def log_partition(emissions: np.ndarray, transitions: np.ndarray) -> float:
    c = _check(emissions, transitions)
    start, stop = c, c + 1
    alpha = transitions[start, :c] + emissions[0]
    for t in range(1, emissions.shape[0]):
        alpha = _logsumexp(alpha[:, None] + transitions[:c, :c], axis=0) + emissions[t]
    return float(_logsumexp(alpha + transitions[:c, stop], axis=0))


def log_likelihood(emissions: np.ndarray, transitions: np.ndarray, labels) -> float:
    """log p(labels | emissions); never positive."""
    return sequence_score(emissions, transitions, labels) - log_partition(emissions, transitions)


def viterbi_decode(emissions: np.ndarray, transitions: np.ndarray) -> tuple[list[int], float]:
    """Highest-scoring label sequence; ties resolve to the lowest label index."""
    c = _check(emissions, transitions)
    if emissions.shape[0] < 1:
        raise ValueError("viterbi needs at least one position")
    start, stop = c, c + 1
    score = transitions[start, :c] + emissions[0]
    backpointers = []
    for t in range(1, emissions.shape[0]):
        candidate = score[:, None] + transitions[:c, :c]
        backpointers.append(candidate.argmax(axis=0))  # argmax takes the lowest index on ties
        score = candidate.max(axis=0) + emissions[t]
    score = score + transitions[:c, stop]
    best = int(score.argmax())
    path = [best]
    for pointers in reversed(backpointers):
        path.append(int(pointers[path[-1]]))
    path.reverse()
    return path, float(score.max())


def crf_loss_grad(
    emissions: np.ndarray, transitions: np.ndarray, labels
) -> tuple[float, np.ndarray, np.ndarray]:
    """Negative log-likelihood and its gradients via expected counts.

    Gradients are marginal probabilities minus observed counts, with the
    marginals computed by forward-backward in log space.
    """
    c = _check(emissions, transitions, labels)
    n = emissions.shape[0]
    start, stop = c, c + 1
    labels = np.asarray(labels)

    alphas = np.empty((n, c))
    alphas[0] = transitions[start, :c] + emissions[0]
    for t in range(1, n):
        alphas[t] = _logsumexp(alphas[t - 1][:, None] + transitions[:c, :c], axis=0) + emissions[t]
    betas = np.empty((n, c))
    betas[n - 1] = transitions[:c, stop]
    for t in range(n - 2, -1, -1):
        betas[t] = _logsumexp(transitions[:c, :c] + (emissions[t + 1] + betas[t + 1])[None, :], axis=1)
    log_z = _logsumexp(alphas[n - 1] + betas[n - 1], axis=0)

    unary = np.exp(alphas + betas - log_z)  # (n, c) position marginals
    d_emissions = unary.copy()
    d_emissions[np.arange(n), labels] -= 1.0

    d_transitions = np.zeros_like(transitions)
    d_transitions[start, :c] += unary[0]
    d_transitions[:c, stop] += unary[n - 1]
    for t in range(1, n):
        pair = np.exp(
            alphas[t - 1][:, None]
            + transitions[:c, :c]
            + (emissions[t] + betas[t])[None, :]
            - log_z
        )
        d_transitions[:c, :c] += pair
    d_transitions[start, labels[0]] -= 1.0
    d_transitions[labels[-1], stop] -= 1.0
    np.subtract.at(d_transitions, (labels[:-1], labels[1:]), 1.0)

    nll = log_z - sequence_score(emissions, transitions, labels)
    return float(nll), d_emissions, d_transitions


class CrfHead:
    """Emission projection plus learned label-pair transitions."""

    def __init__(self, name: str, d_in: int, n_classes: int, rng: np.random.Generator):
        self.n_classes = n_classes
        self.projection = Linear(f"{name}.emit", d_in, n_classes, rng)
        self.transitions = Parameter(f"{name}.transitions", np.zeros((n_classes + 2, n_classes + 2)))

    def emissions(self, features: Tensor) -> Tensor:
        return self.projection(features)

    def nll(self, features: Tensor, labels) -> Tensor:
        """Sequence negative log-likelihood as a differentiable scalar."""
        emissions = self.emissions(features)
        loss, d_em, d_trans = crf_loss_grad(emissions.data, self.transitions.data, labels)

        def vjp(g):
            return g * d_em, g * d_trans

        return ag.custom(np.asarray(loss), (emissions, self.transitions), vjp)

    def decode(self, features: Tensor) -> tuple[list[int], float]:
        return viterbi_decode(self.emissions(features).data, self.transitions.data)

    def parameters(self) -> list[Parameter]:
        return self.projection.parameters() + [self.transitions]
