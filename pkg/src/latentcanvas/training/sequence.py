"""Training sequence layout: [X, start, z_1..z_K, end, latent_end, A, EOS]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics.functional import IGNORE_INDEX
from ..model.tokenizer import Tokenizer


class SequenceError(ValueError):
    pass


@dataclass
class Example:
    """Model-ready sample: token ids plus precomputed continuous features."""

    id: str
    question_ids: list[int]
    image_feats: np.ndarray  # [n_img, d]
    answer_ids: list[int]
    answer: str
    targets: dict  # source -> [K, d]
    meta: dict


@dataclass
class TrainingSequence:
    ids: np.ndarray  # [T], -1 at continuous entries
    cont: np.ndarray  # [T, d]
    ce_labels: np.ndarray  # [T], label of the entry itself; IGNORE where unsupervised
    latent_slots: np.ndarray  # [K]
    answer_span: tuple[int, int]
    prompt_len: int

    def __len__(self):
        return len(self.ids)


def prompt_entries(ex: Example, tok: Tokenizer):
    """X = [BOS, image features..., question tokens]."""
    ids = [tok.bos] + [-1] * len(ex.image_feats) + list(ex.question_ids)
    return ids


def build_sequence(ex: Example, targets: np.ndarray | None, k_train: int, tok: Tokenizer,
                   max_seq_len: int | None = None) -> TrainingSequence:
    targets = np.zeros((0, ex.image_feats.shape[1])) if targets is None else np.asarray(targets, dtype=np.float64)
    if targets.shape[0] != k_train:
        raise SequenceError(f"{ex.id}: {targets.shape[0]} targets for k_train={k_train}")
    d = ex.image_feats.shape[1]
    if targets.shape[1] != d:
        raise SequenceError(f"{ex.id}: target width {targets.shape[1]} != feature width {d}")
    c = tok.controls
    x_ids = prompt_entries(ex, tok)
    ans = list(ex.answer_ids) + [tok.eos]
    ids = x_ids + [c.start] + [-1] * k_train + [c.end, c.latent_end] + ans
    T = len(ids)
    if max_seq_len is not None and T > max_seq_len:
        raise SequenceError(f"{ex.id}: sequence length {T} exceeds max_seq_len {max_seq_len}")
    cont = np.zeros((T, d))
    n_img = len(ex.image_feats)
    cont[1:1 + n_img] = ex.image_feats
    p = len(x_ids)
    slots = np.arange(p + 1, p + 1 + k_train)
    cont[slots] = targets
    labels = np.full(T, IGNORE_INDEX, dtype=np.int64)
    labels[p] = c.start
    labels[p + 1 + k_train] = c.end
    a0 = p + 3 + k_train
    labels[a0:] = ans
    return TrainingSequence(np.asarray(ids, dtype=np.int64), cont, labels, slots, (a0, T), p)


@dataclass
class Batch:
    ids: np.ndarray  # [B, T]
    cont: np.ndarray  # [B, T, d]
    labels: np.ndarray  # [B, T]
    slots: np.ndarray  # [B, K]
    targets: np.ndarray  # [B, K, d]
    lengths: np.ndarray


def collate(seqs, pad_id: int = 0) -> Batch:
    """Right-pad to the longest sequence; padding is never attended to by real positions."""
    ks = {len(s.latent_slots) for s in seqs}
    if len(ks) != 1:
        raise SequenceError("all sequences in a batch need the same latent budget")
    k = ks.pop()
    B = len(seqs)
    T = max(len(s) for s in seqs)
    d = seqs[0].cont.shape[1]
    ids = np.full((B, T), pad_id, dtype=np.int64)
    cont = np.zeros((B, T, d))
    labels = np.full((B, T), IGNORE_INDEX, dtype=np.int64)
    slots = np.zeros((B, k), dtype=np.int64)
    targets = np.zeros((B, k, d))
    for b, s in enumerate(seqs):
        n = len(s)
        ids[b, :n] = s.ids
        cont[b, :n] = s.cont
        labels[b, :n] = s.ce_labels
        slots[b] = s.latent_slots
        targets[b] = s.cont[s.latent_slots]
    return Batch(ids, cont, labels, slots, targets, np.array([len(s) for s in seqs]))
