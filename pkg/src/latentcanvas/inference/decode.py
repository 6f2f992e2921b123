"""Continuous latent rollout followed by greedy answer decoding."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..model.tokenizer import Tokenizer
from ..model.transformer import Stream, ToyLM
from ..numerics.tensor import no_grad
from ..training.sequence import Example, prompt_entries

PERTURB_KINDS = ("none", "zero", "gaussian", "repeat-first")
ANSWER_CAP = 32


class InferenceError(ValueError):
    pass


@dataclass(frozen=True)
class PerturbSpec:
    kind: str = "none"
    noise_scale_mode: str = "per-trace-std"

    def __post_init__(self):
        if self.kind not in PERTURB_KINDS:
            raise InferenceError(f"perturbation kind must be one of {PERTURB_KINDS}, got {self.kind!r}")
        if self.noise_scale_mode != "per-trace-std":
            raise InferenceError("only per-trace-std noise scaling is supported")


@dataclass
class LatentTrace:
    id: str
    latents: np.ndarray  # [K, d] fed-back embeddings e_k
    raw_latents: np.ndarray  # [K, d] head outputs before perturbation
    answer_tokens: list
    answer: str
    token_counts: dict = field(default_factory=dict)
    wall_time: float = 0.0


def apply_perturbation(e_k: np.ndarray, history: np.ndarray, spec: PerturbSpec, rng: np.random.Generator,
                       first: np.ndarray | None = None) -> np.ndarray:
    """Perturb fed-back embeddings ``e_k`` (``[B, d]`` or ``[d]``).

    ``history`` holds the unperturbed e_1..e_{k-1} (``[B, k-1, d]``); ``first`` is the
    stored fed-back e_1 used by repeat-first (identity when absent, i.e. at k=1).
    """
    if spec.kind == "none":
        return e_k
    if spec.kind == "zero":
        return np.zeros_like(e_k)
    if spec.kind == "repeat-first":
        return e_k if first is None else first.copy()
    single = e_k.ndim == 1
    e = e_k[None] if single else e_k
    h = np.asarray(history).reshape(e.shape[0], -1, e.shape[-1]) if history is not None and np.size(history) else \
        np.zeros((e.shape[0], 0, e.shape[-1]))
    allv = np.concatenate([h, e[:, None]], axis=1).reshape(e.shape[0], -1)
    sigma = allv.std(axis=1, keepdims=True)
    out = e + rng.standard_normal(e.shape) * sigma
    return out[0] if single else out


def max_answer_len(model: ToyLM, prompt_len: int, k: int) -> int:
    room = model.cfg.max_seq_len - (prompt_len + 3 + k)
    if room < 1:
        raise InferenceError(f"k_infer={k} leaves no room for an answer within max_seq_len={model.cfg.max_seq_len}")
    return min(ANSWER_CAP, room)


def _prompt_batch(examples, tok: Tokenizer, d: int):
    ids = np.array([prompt_entries(ex, tok) for ex in examples], dtype=np.int64)
    cont = np.zeros(ids.shape + (d,))
    n_img = examples[0].image_feats.shape[0]
    cont[:, 1:1 + n_img] = np.stack([ex.image_feats for ex in examples])
    return ids, cont


def _append(ids, cont, new_ids, new_cont=None):
    B, _, d = cont.shape
    col = np.asarray(new_ids, dtype=np.int64).reshape(B, 1)
    c = np.zeros((B, 1, d)) if new_cont is None else new_cont.reshape(B, 1, d)
    return np.concatenate([ids, col], axis=1), np.concatenate([cont, c], axis=1)


def infer_batch(model: ToyLM, tok: Tokenizer, examples, k_infer: int, perturb: PerturbSpec | None = None,
                rng: np.random.Generator | None = None, answer_cap: int = ANSWER_CAP) -> list[LatentTrace]:
    """Greedy inference for prompts of identical length."""
    if k_infer < 0:
        raise InferenceError("k_infer must be >= 0")
    perturb = perturb or PerturbSpec()
    rng = rng if rng is not None else np.random.default_rng(0)
    lens = {len(prompt_entries(ex, tok)) for ex in examples}
    if len(lens) != 1:
        raise InferenceError("infer_batch needs prompts of one length; use evaluate() for mixed lengths")
    P = lens.pop()
    cap = min(answer_cap, max_answer_len(model, P, k_infer))
    t0 = time.perf_counter()
    c = tok.controls
    B = len(examples)
    d = model.cfg.d_model
    i = model.cfg.align_layer
    ids, cont = _prompt_batch(examples, tok, d)
    ids, cont = _append(ids, cont, [c.start] * B)
    raw = np.zeros((B, k_infer, d))
    fed = np.zeros((B, k_infer, d))
    with no_grad():
        for k in range(k_infer):
            _, hidden = model(Stream(ids, cont))
            z = model.head(hidden[i].data[:, -1]).data
            raw[:, k] = z
            first = fed[:, 0] if k > 0 else None
            e = apply_perturbation(z, raw[:, :k], perturb, rng, first)
            fed[:, k] = e
            ids, cont = _append(ids, cont, [-1] * B, e)
        ids, cont = _append(ids, cont, [c.end] * B)
        ids, cont = _append(ids, cont, [c.latent_end] * B)
        banned = np.array([r for r in tok.reserved_ids() if r != tok.eos])
        out = [[] for _ in range(B)]
        done = np.zeros(B, dtype=bool)
        for _ in range(cap):
            logits, _ = model(Stream(ids, cont))
            last = logits.data[:, -1].copy()
            last[:, banned] = -np.inf
            nxt = last.argmax(axis=1)
            for b in range(B):
                if not done[b]:
                    if nxt[b] == tok.eos:
                        done[b] = True
                    else:
                        out[b].append(int(nxt[b]))
            if done.all():
                break
            ids, cont = _append(ids, cont, np.where(done, tok.eos, nxt))
    wall = (time.perf_counter() - t0) / max(B, 1)
    traces = []
    for b, ex in enumerate(examples):
        counts = {"latent_steps": k_infer, "control_tokens": 3, "answer_tokens": len(out[b])}
        traces.append(LatentTrace(ex.id, fed[b], raw[b], out[b], tok.decode(out[b]), counts, wall))
    return traces


def infer(model: ToyLM, tok: Tokenizer, example: Example, k_infer: int, perturb: PerturbSpec | None = None,
          seed: int = 0) -> LatentTrace:
    return infer_batch(model, tok, [example], k_infer, perturb, np.random.default_rng(seed))[0]
