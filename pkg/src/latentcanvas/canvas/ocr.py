"""Read rendered text back off a canvas raster by glyph template matching.

Only line origins and font sizes are taken from the layout; characters are
recovered from pixels.
"""

from __future__ import annotations

import functools

import numpy as np

from . import raster
from .glyphs import GLYPHS_HEX
from .types import Canvas

INK_THRESHOLD = 128


@functools.lru_cache(maxsize=64)
def _templates(font_px: int):
    chars = [chr(c) for c in sorted(GLYPHS_HEX)]
    masks = np.stack([raster.glyph_mask(ch, font_px).ravel() for ch in chars])
    return chars, masks


def read_cells(px: np.ndarray, x: int, y: int, x_end: int, font_px: int) -> str:
    gw = raster.glyph_width(font_px)
    n = max(0, (x_end - x) // gw)
    if n == 0:
        return ""
    strip = px[y:y + font_px, x:x + n * gw]
    if strip.shape[0] < font_px:
        return ""
    ink = (strip.max(axis=2) < INK_THRESHOLD)
    cells = ink.reshape(font_px, n, gw).transpose(1, 0, 2).reshape(n, -1)
    chars, masks = _templates(font_px)
    # hamming distance to every template
    dist = (cells[:, None, :] != masks[None, :, :]).sum(axis=2)
    return "".join(chars[i] for i in dist.argmin(axis=1)).rstrip()


def read_canvas_text(canvas: Canvas) -> list[str]:
    out = []
    for ln in canvas.layout.get("text_lines", []):
        out.append(read_cells(canvas.pixels, ln["x"], ln["y"], ln["x_end"], ln["font_px"]))
    return out
