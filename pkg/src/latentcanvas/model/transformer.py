"""Decoder-only toy LM taking a mixed stream of token ids and continuous embeddings."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from ..numerics import functional as F
from ..numerics.layers import DecoderLayer, Embedding, LayerNorm, Linear, Module
from ..numerics.tensor import Tensor, ensure_tensor, getitem, parameter, where

HEAD_KINDS = ("mlp", "none", "glu")


class ModelConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    vocab_size: int = 64
    d_model: int = 64
    n_layers: int = 4
    n_heads: int = 4
    max_seq_len: int = 96
    align_layer: int = 2
    head_kind: str = "mlp"
    seed: int = 0
    init_std: float = 0.02

    def validate(self):
        if not 1 <= self.align_layer <= self.n_layers:
            raise ModelConfigError(f"align_layer must be in [1, {self.n_layers}], got {self.align_layer}")
        if self.d_model % self.n_heads:
            raise ModelConfigError("d_model must be divisible by n_heads")
        if self.head_kind not in HEAD_KINDS:
            raise ModelConfigError(f"head_kind must be one of {HEAD_KINDS}")
        if not self.init_std > 0:
            raise ModelConfigError("init_std must be positive")
        if min(self.vocab_size, self.d_model, self.n_layers, self.max_seq_len) < 1:
            raise ModelConfigError("sizes must be positive")
        return self

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Stream:
    """Batched mixed input. ``ids[b, t] < 0`` marks a continuous entry taken from ``cont[b, t]``."""

    ids: np.ndarray  # [B, T] int
    cont: np.ndarray | Tensor | None = None  # [B, T, d]

    @classmethod
    def from_entries(cls, entries, d: int) -> "Stream":
        """Single sequence from a list of ints and length-d vectors."""
        T = len(entries)
        ids = np.full((1, T), -1, dtype=np.int64)
        cont = np.zeros((1, T, d))
        for t, e in enumerate(entries):
            if isinstance(e, (int, np.integer)):
                ids[0, t] = int(e)
            else:
                v = np.asarray(e, dtype=np.float64)
                if v.shape != (d,):
                    raise ModelConfigError(f"continuous entry at {t} has shape {v.shape}, expected ({d},)")
                cont[0, t] = v
        return cls(ids, cont)


class LatentHead(Module):
    """ẑ = Linear2(GELU(Linear1(LN(h)))); ``glu`` gates with a second branch; ``none`` is identity."""

    def __init__(self, d: int, kind: str, rng: np.random.Generator):
        self.kind = kind
        if kind == "none":
            return
        self.ln = LayerNorm(d, affine=True)
        self.fc1 = Linear(d, d, rng)
        if kind == "glu":
            self.gate = Linear(d, d, rng)
        self.fc2 = Linear(d, d, rng)

    def forward(self, h):
        h = ensure_tensor(h)
        if self.kind == "none":
            return h
        n = self.ln(h)
        a = F.gelu(self.fc1(n))
        if self.kind == "glu":
            a = a * self.gate(n)
        return self.fc2(a)


class ToyLM(Module):
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg.validate()
        rng = np.random.default_rng(cfg.seed)
        d = cfg.d_model
        self.tok = Embedding(cfg.vocab_size, d, rng)
        self.pos = parameter(rng.normal(0.0, 0.02, size=(cfg.max_seq_len, d)))
        self.layers = [DecoderLayer(d, cfg.n_heads, rng, cfg.n_layers, cfg.init_std) for _ in range(cfg.n_layers)]
        self.ln_f = LayerNorm(d)
        self.lm_head = Linear(d, cfg.vocab_size, rng)
        self.head = LatentHead(d, cfg.head_kind, rng)

    def backbone_parameters(self):
        return [(n, p) for n, p in self.named_parameters() if not n.startswith("head.")]

    def head_parameters(self):
        return [(n, p) for n, p in self.named_parameters() if n.startswith("head.")]

    def embed(self, stream: Stream) -> Tensor:
        ids = np.asarray(stream.ids)
        if ids.ndim != 2:
            raise ModelConfigError("stream ids must be [B, T]")
        B, T = ids.shape
        d = self.cfg.d_model
        if T > self.cfg.max_seq_len:
            raise ModelConfigError(f"stream length {T} exceeds max_seq_len {self.cfg.max_seq_len}")
        is_cont = ids < 0
        if np.any(ids >= self.cfg.vocab_size):
            raise ModelConfigError("token id out of vocabulary")
        x = self.tok(np.where(is_cont, 0, ids))
        if is_cont.any():
            if stream.cont is None:
                raise ModelConfigError("continuous entries present but no continuous values given")
            cont = ensure_tensor(stream.cont)
            if cont.shape != (B, T, d):
                raise ModelConfigError(f"continuous entries must be [B, T, {d}], got {cont.shape}")
            x = where(np.broadcast_to(is_cont[..., None], (B, T, d)), cont, x)
        return x + getitem(self.pos, slice(0, T))

    def forward(self, stream: Stream):
        """Returns ``(logits [B,T,V], hidden)``; ``hidden[l]`` is the layer-l output, ``hidden[0]`` the embeddings."""
        x = self.embed(stream)
        hidden = [x]
        for layer in self.layers:
            x = layer(x)
            hidden.append(x)
        logits = self.lm_head(self.ln_f(x))
        return logits, hidden

    def latent_head_apply(self, h):
        return self.head(h)


def init_control_embeddings(model: ToyLM, controls, donors: dict[str, int]) -> ToyLM:
    """Copy donor rows into the four control-token rows, e.g. ``{"start": bos, "latent": img, ...}``."""
    table = model.tok.weight.data
    V = table.shape[0]
    for field_name in ("start", "latent", "end", "latent_end"):
        donor = donors[field_name]
        target = getattr(controls, field_name)
        if not (0 <= donor < V and 0 <= target < V):
            raise ModelConfigError(f"donor/control id out of vocabulary for {field_name}: {donor}->{target}")
        if donor in controls.ids():
            raise ModelConfigError(f"donor for {field_name} must not itself be a control token")
        table[target] = table[donor]
    return model


def default_donors(tok) -> dict[str, int]:
    return {"start": tok.bos, "latent": tok.img, "end": tok.eos, "latent_end": tok.eos}
