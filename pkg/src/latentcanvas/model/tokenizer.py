"""Closed-vocabulary whitespace tokenizer with reserved special and control ids."""

from __future__ import annotations

import json
from dataclasses import dataclass

SPECIALS = ("<pad>", "<unk>", "<bos>", "<eos>", "<img>")
CONTROLS = ("<|univlr_start|>", "<|univlr|>", "<|univlr_end|>", "<|univlr_latent_end|>")


@dataclass(frozen=True)
class ControlTokens:
    start: int
    latent: int
    end: int
    latent_end: int

    def ids(self) -> tuple[int, int, int, int]:
        return (self.start, self.latent, self.end, self.latent_end)


class Tokenizer:
    def __init__(self, words):
        vocab = list(SPECIALS) + list(CONTROLS)
        seen = set(vocab)
        for w in words:
            if w not in seen:
                vocab.append(w)
                seen.add(w)
        self.vocab = vocab
        self.index = {w: i for i, w in enumerate(vocab)}

    @classmethod
    def from_texts(cls, texts) -> "Tokenizer":
        words = sorted({w for t in texts for w in t.lower().split()})
        return cls(words)

    def __len__(self):
        return len(self.vocab)

    @property
    def pad(self) -> int:
        return 0

    @property
    def unk(self) -> int:
        return 1

    @property
    def bos(self) -> int:
        return 2

    @property
    def eos(self) -> int:
        return 3

    @property
    def img(self) -> int:
        return 4

    @property
    def controls(self) -> ControlTokens:
        base = len(SPECIALS)
        return ControlTokens(base, base + 1, base + 2, base + 3)

    def reserved_ids(self) -> list[int]:
        return list(range(len(SPECIALS) + len(CONTROLS)))

    def encode(self, text: str) -> list[int]:
        return [self.index.get(w, self.unk) for w in text.lower().split()]

    def decode(self, ids) -> str:
        """Word tokens only; special and control ids are dropped."""
        n_res = len(SPECIALS) + len(CONTROLS)
        return " ".join(self.vocab[i] for i in ids if i >= n_res and i < len(self.vocab))

    def to_json(self) -> str:
        return json.dumps(self.vocab)

    @classmethod
    def from_json(cls, s: str) -> "Tokenizer":
        vocab = json.loads(s)
        n_res = len(SPECIALS) + len(CONTROLS)
        if tuple(vocab[:n_res]) != SPECIALS + CONTROLS:
            raise ValueError("token map does not start with the reserved special/control tokens")
        return cls(vocab[n_res:])
