"""AdamW with global-norm clipping and a linear-warmup / cosine-decay schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class CosineSchedule:
    base_lr: float
    total_steps: int
    warmup_ratio: float = 0.05

    @property
    def warmup_steps(self) -> int:
        return int(math.ceil(self.warmup_ratio * self.total_steps))

    def factor(self, step: int) -> float:
        """Multiplier for the update with 1-based index ``step``."""
        w = self.warmup_steps
        if w and step <= w:
            return step / w
        if self.total_steps <= w:
            return 1.0
        progress = min(1.0, (step - w) / (self.total_steps - w))
        return 0.5 * (1.0 + math.cos(math.pi * progress))

    def lr(self, step: int) -> float:
        return self.base_lr * self.factor(step)


@dataclass
class ParamGroup:
    names: list[str]
    params: list[Tensor]
    schedule: CosineSchedule


@dataclass
class OptimState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def global_grad_norm(params) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return math.sqrt(total)


class AdamW:
    def __init__(self, groups: list[ParamGroup], betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.1, clip_norm: float | None = 1.0):
        self.groups = groups
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.clip_norm = clip_norm
        self.state = OptimState()
        for g in groups:
            for name, p in zip(g.names, g.params):
                self.state.m[name] = np.zeros_like(p.data)
                self.state.v[name] = np.zeros_like(p.data)

    def all_params(self):
        for g in self.groups:
            yield from zip(g.names, g.params)

    def zero_grad(self):
        for _, p in self.all_params():
            p.grad = None

    def current_lrs(self) -> list[float]:
        return [g.schedule.lr(max(self.state.step, 1)) for g in self.groups]

    def step(self) -> float:
        """Apply one update; returns the pre-clip global gradient norm."""
        for name, p in self.all_params():
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise NonFiniteGradient(f"non-finite gradient in parameter {name!r}")
        norm = global_grad_norm(p for _, p in self.all_params())
        scale = 1.0
        if self.clip_norm is not None and norm > self.clip_norm:
            scale = self.clip_norm / norm

        self.state.step += 1
        t = self.state.step
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for g in self.groups:
            lr = g.schedule.lr(t)
            for name, p in zip(g.names, g.params):
                grad = np.zeros_like(p.data) if p.grad is None else p.grad * scale
                m = self.state.m[name]
                v = self.state.v[name]
                m *= self.beta1
                m += (1.0 - self.beta1) * grad
                v *= self.beta2
                v += (1.0 - self.beta2) * grad * grad
                p.data = p.data * (1.0 - lr * self.weight_decay) - lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        return norm
