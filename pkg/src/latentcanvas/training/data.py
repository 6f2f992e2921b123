"""Turn reasoning samples into model-ready examples with cached latent targets."""

from __future__ import annotations

import numpy as np

from ..canvas.layout import render
from ..canvas.raster import highlight_regions
from ..canvas.types import RenderConfig
from ..encoder.cache import TargetCache
from ..encoder.pooling import pool_targets
from ..encoder.vision import VisionEncoder
from ..model.tokenizer import Tokenizer
from .sequence import Example

STAGE_SOURCES = ("stage1-aux", "stage2-canvas")
N_IMAGE_TOKENS = 16


def build_tokenizer(samples) -> Tokenizer:
    return Tokenizer.from_texts([s.question for s in samples] + [s.answer for s in samples])


def evidence_image(sample):
    """The highlighted auxiliary image of the first joint block (first aux image otherwise)."""
    for b in sample.trace:
        if b.kind == "joint":
            return highlight_regions(sample.aux_images[b.image_ref], b.focus_regions)
    return sample.aux_images[0]


def compute_targets(sample, encoder: VisionEncoder, source: str, k: int, render_cfg: RenderConfig,
                    pool_variant: str = "avg2d") -> np.ndarray:
    if source == "stage1-aux":
        img = evidence_image(sample)
    elif source == "stage2-canvas":
        img = render(sample.trace, sample.aux_images, render_cfg)
    else:
        raise ValueError(f"unknown target source {source!r}")
    return pool_targets(encoder.encode(img), k, pool_variant, source).values


def problem_features(sample, encoder: VisionEncoder) -> np.ndarray:
    return pool_targets(encoder.encode(sample.problem_image), N_IMAGE_TOKENS, "avg2d").values


def prepare_examples(samples, encoder: VisionEncoder, tok: Tokenizer, k: int,
                     sources=STAGE_SOURCES, render_cfg: RenderConfig | None = None,
                     pool_variant: str = "avg2d", cache: TargetCache | None = None,
                     encoder_seed: int = 0) -> list[Example]:
    render_cfg = render_cfg or RenderConfig()
    out = []
    for s in samples:
        targets = {}
        for src in sources:
            if k == 0:
                targets[src] = np.zeros((0, encoder.d))
                continue
            key = (s.id, src, k, encoder_seed)
            if cache is not None and key in cache:
                targets[src] = cache.get(*key)
            else:
                targets[src] = compute_targets(s, encoder, src, k, render_cfg, pool_variant)
                if cache is not None:
                    cache.put(s.id, src, encoder_seed, targets[src])
        out.append(Example(s.id, tok.encode(s.question), problem_features(s, encoder), tok.encode(s.answer),
                           s.answer, targets, dict(s.meta)))
    return out
