"""Language-modelling and latent-alignment losses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import functional as F
from ..numerics.tensor import Tensor, ensure_tensor, getitem, sqrt, tsum, where

ZERO_NORM = 1e-8


@dataclass
class LossReport:
    l_ce: float
    l_align: float
    total: float
    lam: float
    mse_k: list = field(default_factory=list)
    cos_k: list = field(default_factory=list)
    zero_rows: int = 0

    def as_dict(self) -> dict:
        return {"l_ce": self.l_ce, "l_align": self.l_align, "total": self.total}


def shifted_ce(logits: Tensor, labels: np.ndarray) -> Tensor:
    """CE where logits at t predict the label stored at t+1."""
    logits = ensure_tensor(logits)
    return F.cross_entropy(getitem(logits, (Ellipsis, slice(0, -1), slice(None))), labels[..., 1:])


def align_loss(pred, target, eps: float = F.LN_EPS):
    """Mean over slots of (1/d)||LN(p) - LN(t)||^2 + 1 - cos(LN(p), LN(t)); LN has no affine.

    ``pred``/``target`` are ``[..., K, d]``. A row that normalizes to the zero
    vector gets cos := 0 and is counted in ``zero_rows``. Returns the loss tensor
    and a dict with per-slot ``mse_k`` and ``cos_k`` (averaged over leading axes).
    """
    pred = ensure_tensor(pred)
    target = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"pred {pred.shape} and target {target.shape} shapes differ")
    if pred.ndim < 2 or pred.shape[-2] < 1:
        raise ValueError("align_loss needs at least one latent slot")
    d = pred.shape[-1]
    a = F.layer_norm(pred, None, None, eps)
    b = F.layer_norm(Tensor(target), None, None, eps).data
    diff = a - b
    mse = tsum(diff * diff, axis=-1) * (1.0 / d)
    saa = tsum(a * a, axis=-1)
    sbb = (b * b).sum(-1)
    zero = (saa.data < ZERO_NORM ** 2) | (sbb < ZERO_NORM ** 2)
    # sqrt(s*s) == s exactly, so identical rows give cos == 1 bitwise
    denom = sqrt(saa * np.where(zero, 1.0, sbb) + zero.astype(np.float64))
    cos = where(zero, Tensor(np.zeros(zero.shape)), tsum(a * b, axis=-1) / denom)
    cos = where(cos.data > 1.0, Tensor(np.ones(zero.shape)), cos)
    cos = where(cos.data < -1.0, Tensor(-np.ones(zero.shape)), cos)
    per = mse + (1.0 - cos)
    loss = per.mean()
    lead = tuple(range(per.ndim - 1))
    comps = {"mse_k": mse.data.mean(axis=lead).tolist() if lead else mse.data.tolist(),
             "cos_k": (1.0 - cos.data).mean(axis=lead).tolist() if lead else (1.0 - cos.data).tolist(),
             "zero_rows": int(zero.sum()), "per_slot": per.data}
    return loss, comps
