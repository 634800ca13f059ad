"""Optimizers over named parameters."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .autograd import Parameter


def clip_global_norm(params: Sequence[Parameter], max_norm: float) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = total**0.5
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm


class Sgd:
    """Plain stochastic gradient descent with per-epoch multiplicative decay."""

    def __init__(self, params: Sequence[Parameter], lr: float = 0.01, decay: float = 0.05, clip: float = 5.0):
        self.params = list(params)
        self.lr = lr
        self.decay = decay
        self.clip = clip

    def step(self) -> None:
        clip_global_norm(self.params, self.clip)
        for p in self.params:
            if p.trainable and p.grad is not None:
                p.data -= self.lr * p.grad

    def end_epoch(self) -> None:
        self.lr *= 1.0 - self.decay


class Adam:
    """Adaptive-moment optimizer with bias correction."""

    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        decay: float = 0.0,
        clip: float = 5.0,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.decay = decay
        self.clip = clip
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        clip_global_norm(self.params, self.clip)
        self.t += 1
        correct1 = 1.0 - self.beta1**self.t
        correct2 = 1.0 - self.beta2**self.t
        for i, p in enumerate(self.params):
            if not p.trainable or p.grad is None:
                continue
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * p.grad
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * p.grad**2
            step = self.lr * (self.m[i] / correct1) / (np.sqrt(self.v[i] / correct2) + self.eps)
            p.data -= step

    def end_epoch(self) -> None:
        self.lr *= 1.0 - self.decay
