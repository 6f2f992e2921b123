"""Integer-exact raster primitives: fills, strokes, nearest-neighbour scaling, glyphs, arrows."""

from __future__ import annotations

import functools
import struct
import zlib
from pathlib import Path

import numpy as np

from .glyphs import GLYPH_H, GLYPH_W, GLYPHS_HEX
from .types import AuxiliaryImage, Box, RenderInputError

WHITE = (255, 255, 255)
BLACK = (0, 0, 0)
BORDER = (40, 40, 40)
ARROW = (90, 90, 90)
HIGHLIGHT = (255, 0, 0)

ARROW_SHAFT = 2
ARROW_HEAD = 6


def blank(width: int, height: int, color=WHITE) -> np.ndarray:
    out = np.empty((height, width, 3), dtype=np.uint8)
    out[:] = color
    return out


def fill_rect(img: np.ndarray, box: Box, color):
    x0, y0, x1, y1 = box
    img[y0:y1, x0:x1] = color


def stroke_rect(img: np.ndarray, box: Box, width: int, color):
    """Draw a ``width``-px outline on the inside of ``box``."""
    x0, y0, x1, y1 = box
    w = min(width, (x1 - x0 + 1) // 2, (y1 - y0 + 1) // 2)
    img[y0:y0 + w, x0:x1] = color
    img[y1 - w:y1, x0:x1] = color
    img[y0:y1, x0:x0 + w] = color
    img[y0:y1, x1 - w:x1] = color


def resize_nearest(px: np.ndarray, width: int, height: int) -> np.ndarray:
    h, w = px.shape[:2]
    if (w, h) == (width, height):
        return px.copy()
    rows = (np.arange(height) * h) // height
    cols = (np.arange(width) * w) // width
    return px[rows][:, cols]


def fit_within(w: int, h: int, max_w: int, max_h: int) -> tuple[int, int]:
    """Largest downscale (never upscale) of ``(w, h)`` inside ``(max_w, max_h)``, floored."""
    if w <= max_w and h <= max_h:
        return w, h
    # compare w/max_w against h/max_h without floats
    if w * max_h >= h * max_w:
        return max_w, max(1, (h * max_w) // w)
    return max(1, (w * max_h) // h), max_h


def paste(dst: np.ndarray, src: np.ndarray, x: int, y: int):
    h, w = src.shape[:2]
    dst[y:y + h, x:x + w] = src


def highlight_regions(img: AuxiliaryImage, regions, width: int = 3, color=HIGHLIGHT) -> AuxiliaryImage:
    """Copy of ``img`` with a ``width``-px stroke inside each region, drawn in list order."""
    out = img.pixels.copy()
    for box in regions:
        x0, y0, x1, y1 = (int(v) for v in box)
        if not (0 <= x0 < x1 <= img.width and 0 <= y0 < y1 <= img.height):
            raise RenderInputError(f"region {box} outside image bounds {img.width}x{img.height}")
        stroke_rect(out, (x0, y0, x1, y1), width, color)
    return AuxiliaryImage(out)


# ------------------------------------------------------------------- glyphs
def glyph_width(font_px: int) -> int:
    return max(1, (font_px * GLYPH_W) // GLYPH_H)


@functools.lru_cache(maxsize=None)
def _base_glyph(code: int) -> np.ndarray:
    hx = GLYPHS_HEX.get(code, GLYPHS_HEX[ord("?")])
    rows = np.frombuffer(bytes.fromhex(hx), dtype=np.uint8)
    return np.unpackbits(rows[:, None], axis=1).astype(bool)


@functools.lru_cache(maxsize=4096)
def glyph_mask(ch: str, font_px: int) -> np.ndarray:
    """Boolean ``font_px x glyph_width(font_px)`` mask, nearest-neighbour scaled."""
    base = _base_glyph(ord(ch))
    gw = glyph_width(font_px)
    rows = (np.arange(font_px) * GLYPH_H) // font_px
    cols = (np.arange(gw) * GLYPH_W) // gw
    m = base[rows][:, cols]
    m.setflags(write=False)
    return m


def draw_text(img: np.ndarray, x: int, y: int, text: str, font_px: int, color=BLACK):
    gw = glyph_width(font_px)
    for i, ch in enumerate(text):
        if ch == " ":
            continue
        m = glyph_mask(ch, font_px)
        region = img[y:y + font_px, x + i * gw:x + (i + 1) * gw]
        region[m[:region.shape[0], :region.shape[1]]] = color


# ------------------------------------------------------------------- arrows
def draw_arrow(img: np.ndarray, start: tuple[int, int], end: tuple[int, int], color=ARROW):
    """Axis-aligned arrow with a 2-px shaft and a 6-px triangular head at ``end``."""
    (x0, y0), (x1, y1) = start, end
    if x0 != x1 and y0 != y1:
        raise ValueError("only axis-aligned arrows are supported")
    if y0 == y1 and x0 == x1:
        return
    head = ARROW_HEAD
    if x0 == x1:
        step = 1 if y1 > y0 else -1
        body_end = y1 - step * (head - 1)
        lo, hi = sorted((y0, body_end))
        img[lo:hi + 1, x0 - 1:x0 + 1] = color
        for j in range(head):
            yy = y1 - step * j
            img[yy, x0 - 1 - j:x0 + 1 + j] = color
    else:
        step = 1 if x1 > x0 else -1
        body_end = x1 - step * (head - 1)
        lo, hi = sorted((x0, body_end))
        img[y0 - 1:y0 + 1, lo:hi + 1] = color
        for j in range(head):
            xx = x1 - step * j
            img[y0 - 1 - j:y0 + 1 + j, xx] = color


def arrow_extent(start, end) -> Box:
    """Bounding box (exclusive ends) of the pixels ``draw_arrow`` touches."""
    (x0, y0), (x1, y1) = start, end
    r = ARROW_HEAD
    if x0 == x1:
        return (x0 - r, min(y0, y1), x0 + r, max(y0, y1) + 1)
    return (min(x0, x1), y0 - r, max(x0, x1) + 1, y0 + r)


# ----------------------------------------------------------------------- io
def write_ppm(path, px: np.ndarray):
    px = np.ascontiguousarray(px, dtype=np.uint8)
    h, w = px.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(px.tobytes())


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = []
    pos = 0
    while len(parts) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        parts.append(raw[pos:end])
        pos = end
    if parts[0] != b"P6" or int(parts[3]) != 255:
        raise ValueError(f"{path}: only 8-bit binary P6 is supported")
    w, h = int(parts[1]), int(parts[2])
    data = raw[pos + 1:pos + 1 + w * h * 3]
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()


def write_png(path, px: np.ndarray):
    px = np.ascontiguousarray(px, dtype=np.uint8)
    h, w = px.shape[:2]
    scan = np.concatenate([np.zeros((h, 1), dtype=np.uint8), px.reshape(h, w * 3)], axis=1).tobytes()

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    with open(path, "wb") as fh:
        fh.write(b"\x89PNG\r\n\x1a\n")
        fh.write(chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)))
        fh.write(chunk(b"IDAT", zlib.compress(scan, 6)))
        fh.write(chunk(b"IEND", b""))
