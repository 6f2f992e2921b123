"""Fused differentiable ops: normalization, activations, softmax, losses, attention."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from .tensor import Tensor, ensure_tensor, matmul, reshape, transpose, where

IGNORE_INDEX = -100
LN_EPS = 1e-5

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def layer_norm(x, gain: Tensor | None = None, bias: Tensor | None = None, eps: float = LN_EPS) -> Tensor:
    """Normalize over the last axis with population variance, then optional affine."""
    x = ensure_tensor(x)
    d = x.shape[-1] if x.ndim else 0
    if d == 0:
        raise ValueError("layer_norm needs a non-empty last axis")
    if eps <= 0:
        raise ValueError("eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd

    def back(g):
        gm = g.mean(axis=-1, keepdims=True)
        gx = g * xhat
        return (rstd * (g - gm - xhat * gx.mean(axis=-1, keepdims=True)),)

    out = Tensor._make(xhat, (x,), back)
    if gain is not None:
        out = out * gain
    if bias is not None:
        out = out + bias
    return out


def gelu(x) -> Tensor:
    """Exact GELU, x * Phi(x) with the erf-based normal CDF."""
    x = ensure_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out = x.data * cdf

    def back(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf),)

    return Tensor._make(out, (x,), back)


def softmax(x, axis: int = -1) -> Tensor:
    x = ensure_tensor(x)
    m = np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(x.data - m)
    y = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._make(y, (x,), back)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = ensure_tensor(x)
    m = np.max(x.data, axis=axis, keepdims=True)
    lse = m + np.log(np.exp(x.data - m).sum(axis=axis, keepdims=True))
    out = x.data - lse

    def back(g):
        p = np.exp(out)
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return Tensor._make(out, (x,), back)


def cross_entropy(logits, labels, ignore_index: int = IGNORE_INDEX) -> Tensor:
    """Mean negative log-likelihood over positions whose label is not ``ignore_index``.

    ``logits`` is ``[..., V]`` and ``labels`` has the leading shape. Ignored rows
    never enter the computation, so their logits cannot influence the value.
    Returns 0 (with a zero gradient) when every row is ignored.
    """
    logits = ensure_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    V = logits.shape[-1]
    if labels.shape != logits.shape[:-1]:
        raise ValueError(f"labels shape {labels.shape} does not match logits {logits.shape[:-1]}")
    flat_labels = labels.reshape(-1)
    valid = flat_labels != ignore_index
    bad = flat_labels[valid]
    if bad.size and (bad.min() < 0 or bad.max() >= V):
        raise ValueError(f"label out of range [0, {V}): {bad[(bad < 0) | (bad >= V)][0]}")
    rows = np.nonzero(valid)[0]
    n = rows.size
    flat = logits.data.reshape(-1, V)
    if n == 0:
        return Tensor._make(np.asarray(0.0), (logits,), lambda g: (np.zeros_like(logits.data),))
    z = flat[rows]
    tgt = flat_labels[rows]
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    s = e.sum(axis=1, keepdims=True)
    lse = (m + np.log(s))[:, 0]
    loss = (lse - z[np.arange(n), tgt]).sum() / n

    def back(g):
        p = e / s
        p[np.arange(n), tgt] -= 1.0
        full = np.zeros_like(flat)
        full[rows] = p * (g / n)
        return (full.reshape(logits.shape),)

    return Tensor._make(np.asarray(loss), (logits,), back)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = matmul(x, weight)
    return out + bias if bias is not None else out


def causal_mask(T: int) -> np.ndarray:
    return np.tril(np.ones((T, T), dtype=bool))


def causal_attention_block(x, params: dict, n_heads: int, eps: float = LN_EPS) -> Tensor:
    """Pre-norm causal multi-head self-attention with residual: x + Wo(attn(LN(x))).

    ``params`` holds ``ln_gain``, ``ln_bias``, ``wq``, ``wk``, ``wv``, ``wo``
    (projections are ``[d, d]`` and bias-free). Accepts ``[T, d]`` or ``[B, T, d]``.
    """
    x = ensure_tensor(x)
    squeeze = x.ndim == 2
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    B, T, d = x.shape
    for key in ("wq", "wk", "wv", "wo"):
        if params[key].shape != (d, d):
            raise ValueError(f"{key} has shape {params[key].shape}, expected {(d, d)}")
    if d % n_heads:
        raise ValueError(f"d={d} not divisible by n_heads={n_heads}")
    dh = d // n_heads

    h = layer_norm(x, params["ln_gain"], params["ln_bias"], eps)

    def heads(t):
        return transpose(reshape(t, (B, T, n_heads, dh)), (0, 2, 1, 3))

    q = heads(matmul(h, params["wq"]))
    k = heads(matmul(h, params["wk"]))
    v = heads(matmul(h, params["wv"]))
    scores = matmul(q, transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dh))
    scores = where(causal_mask(T), scores, -np.inf)
    attn = softmax(scores, axis=-1)
    ctx = matmul(attn, v)
    ctx = reshape(transpose(ctx, (0, 2, 1, 3)), (B, T, d))
    out = x + matmul(ctx, params["wo"])
    return reshape(out, (T, d)) if squeeze else out
