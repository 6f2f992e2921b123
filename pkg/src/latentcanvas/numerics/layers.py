"""Parameter containers and the layers the toy language model is built from."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from . import functional as F
from .tensor import Tensor, embedding, parameter


class Module:
    """Walks attributes in definition order to find parameters and sub-modules."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(name + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for k, p in own.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"shape mismatch for {k}: {arr.shape} vs {p.shape}")
            p.data = arr.copy()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True, std: float = 0.02):
        self.weight = parameter(rng.normal(0.0, std, size=(d_in, d_out)))
        self.bias = parameter(np.zeros(d_out)) if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int, affine: bool = True, eps: float = F.LN_EPS):
        self.eps = eps
        self.gain = parameter(np.ones(d)) if affine else None
        self.bias = parameter(np.zeros(d)) if affine else None

    def forward(self, x):
        return F.layer_norm(x, self.gain, self.bias, self.eps)


class Embedding(Module):
    def __init__(self, n: int, d: int, rng: np.random.Generator, std: float = 0.02):
        self.weight = parameter(rng.normal(0.0, std, size=(n, d)))

    def forward(self, ids):
        return embedding(self.weight, ids)


class CausalSelfAttention(Module):
    """Residual pre-norm attention sub-block; see ``functional.causal_attention_block``."""

    def __init__(self, d: int, n_heads: int, rng: np.random.Generator, out_std: float = 0.02, std: float = 0.02):
        self.n_heads = n_heads
        self.ln = LayerNorm(d)
        self.wq = parameter(rng.normal(0.0, std, size=(d, d)))
        self.wk = parameter(rng.normal(0.0, std, size=(d, d)))
        self.wv = parameter(rng.normal(0.0, std, size=(d, d)))
        self.wo = parameter(rng.normal(0.0, out_std, size=(d, d)))

    def params(self) -> dict:
        return {"ln_gain": self.ln.gain, "ln_bias": self.ln.bias,
                "wq": self.wq, "wk": self.wk, "wv": self.wv, "wo": self.wo}

    def forward(self, x):
        return F.causal_attention_block(x, self.params(), self.n_heads, self.ln.eps)


class MLPBlock(Module):
    """Residual pre-norm feed-forward sub-block: x + W2 GELU(W1 LN(x))."""

    def __init__(self, d: int, hidden: int, rng: np.random.Generator, out_std: float = 0.02, std: float = 0.02):
        self.ln = LayerNorm(d)
        self.fc1 = Linear(d, hidden, rng, std=std)
        self.fc2 = Linear(hidden, d, rng, std=out_std)

    def forward(self, x):
        return x + self.fc2(F.gelu(self.fc1(self.ln(x))))


class DecoderLayer(Module):
    def __init__(self, d: int, n_heads: int, rng: np.random.Generator, n_layers: int, std: float = 0.02):
        # residual-branch outputs shrink with depth
        out_std = std / np.sqrt(2 * n_layers)
        self.attn = CausalSelfAttention(d, n_heads, rng, out_std, std)
        self.mlp = MLPBlock(d, 4 * d, rng, out_std, std)

    def forward(self, x):
        return self.mlp(self.attn(x))
