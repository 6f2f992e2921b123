"""Frozen toy vision encoder: patchify, seeded orthogonal projection, depthwise neighbour mix.

Pure numpy. Nothing here is ever recorded on an autodiff tape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..canvas.types import AuxiliaryImage, Canvas
from .pooling import FeatureMap, bin_bounds


@dataclass(frozen=True)
class EncoderConfig:
    d: int = 64
    seed: int = 1234
    patch: int = 16
    max_side: int = 448
    mix_scale: float = 0.05


class VisionEncoder(Protocol):
    d: int

    def encode(self, img) -> FeatureMap: ...


def _pixels(img) -> np.ndarray:
    if isinstance(img, (Canvas, AuxiliaryImage)):
        return img.pixels
    px = np.asarray(img)
    if px.ndim != 3 or px.shape[2] != 3 or px.size == 0:
        raise ValueError(f"expected a non-empty HxWx3 raster, got {px.shape}")
    return px


def area_resize(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Box-filter resize using floor/ceil bins; ``x`` is ``[H, W, C]`` float."""
    h, w = x.shape[:2]
    if (h, w) == (out_h, out_w):
        return x.astype(np.float64, copy=True)
    integ = np.zeros((h + 1, w + 1, x.shape[2]))
    integ[1:, 1:] = x.cumsum(0).cumsum(1)
    rb = np.array(bin_bounds(h, out_h))
    cb = np.array(bin_bounds(w, out_w))
    r0, r1 = rb[:, 0][:, None], rb[:, 1][:, None]
    c0, c1 = cb[:, 0][None, :], cb[:, 1][None, :]
    s = integ[r1, c1] - integ[r0, c1] - integ[r1, c0] + integ[r0, c0]
    area = ((r1 - r0) * (c1 - c0))[..., None]
    return s / area


def target_size(h: int, w: int, max_side: int) -> tuple[int, int]:
    m = max(h, w)
    if m <= max_side:
        return h, w
    return max(1, (h * max_side) // m), max(1, (w * max_side) // m)


class ToyVisionEncoder:
    """Deterministic frozen encoder; two instances with the same config agree bitwise."""

    def __init__(self, cfg: EncoderConfig | None = None):
        self.cfg = cfg or EncoderConfig()
        c = self.cfg
        patch_dim = c.patch * c.patch * 3
        if c.d > patch_dim:
            raise ValueError(f"d={c.d} exceeds the patch dimension {patch_dim}")
        rng = np.random.default_rng(c.seed)
        q, r = np.linalg.qr(rng.standard_normal((patch_dim, c.d)))
        # sign fix makes the factorization unique
        self.projection = q * np.sign(np.diag(r))[None, :]
        self.kernel = rng.standard_normal((3, 3, c.d)) * c.mix_scale
        self.kernel[1, 1] = 1.0
        self.projection.setflags(write=False)
        self.kernel.setflags(write=False)
        self.d = c.d

    def patch_grid(self, img) -> np.ndarray:
        """Ink intensity in [0, 1] after resize, zero padded to whole patches: ``[H_f, W_f, P*P*3]``."""
        px = _pixels(img)
        h, w = target_size(px.shape[0], px.shape[1], self.cfg.max_side)
        ink = 1.0 - area_resize(px.astype(np.float64), h, w) / 255.0
        p = self.cfg.patch
        hf, wf = -(-h // p), -(-w // p)
        padded = np.zeros((hf * p, wf * p, 3))
        padded[:h, :w] = ink
        return padded.reshape(hf, p, wf, p, 3).transpose(0, 2, 1, 3, 4).reshape(hf, wf, p * p * 3)

    def encode(self, img) -> FeatureMap:
        feats = self.patch_grid(img) @ self.projection
        hf, wf, d = feats.shape
        pad = np.zeros((hf + 2, wf + 2, d))
        pad[1:-1, 1:-1] = feats
        out = np.zeros_like(feats)
        for dy in range(3):
            for dx in range(3):
                out += self.kernel[dy, dx] * pad[dy:dy + hf, dx:dx + wf]
        return FeatureMap(out)
