"""Layout strategies composing a reasoning trace and auxiliary images into one canvas."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from . import raster
from .types import AuxiliaryImage, Box, Canvas, ReasoningBlock, RenderConfig, RenderInputError

BORDER_PX = 1


def line_advance(font_px: int) -> int:
    return font_px + font_px // 4


def _wrap(words: list[str], font_px: int, line_geometry):
    """Greedy wrap. ``line_geometry(i)`` gives ``(x, max_chars)`` for the i-th line.

    Returns a list of ``(x, text)``; words longer than a line are hard-split.
    """
    lines = []
    cur = ""
    x, cap = line_geometry(0)
    pending = None  # remainder of a hard-split word
    it = iter(words)
    while True:
        w = pending if pending is not None else next(it, None)
        pending = None
        if w is None:
            break
        if cap < 1:
            raise RenderInputError(f"line width below one glyph at font {font_px}px")
        cand = w if not cur else cur + " " + w
        if len(cand) <= cap:
            cur = cand
            continue
        if cur:
            lines.append((x, cur))
            cur = ""
            x, cap = line_geometry(len(lines))
            pending = w
            continue
        # word alone overflows an empty line
        lines.append((x, w[:cap]))
        pending = w[cap:]
        x, cap = line_geometry(len(lines))
    if cur:
        lines.append((x, cur))
    return lines


def measure_text(text: str, font_px: int, max_width: int) -> tuple[list[str], int]:
    """Greedy word wrap into ``max_width`` px; returns ``(lines, height)``."""
    if font_px < 1:
        raise RenderInputError("font_px must be >= 1")
    gw = raster.glyph_width(font_px)
    if max_width < gw:
        raise RenderInputError(f"max_width {max_width}px is narrower than one glyph ({gw}px)")
    cap = max_width // gw
    lines = [t for _, t in _wrap(text.split(), font_px, lambda i: (0, cap))]
    return lines, len(lines) * line_advance(font_px)


# -------------------------------------------------------------------- cards
def _chrome(cfg: RenderConfig) -> int:
    return BORDER_PX + cfg.card_padding


def _prepared_image(block: ReasoningBlock, images: Sequence[AuxiliaryImage], cfg: RenderConfig) -> AuxiliaryImage:
    if block.image_ref is None or not 0 <= block.image_ref < len(images):
        raise RenderInputError(f"joint block references missing image {block.image_ref!r}")
    return raster.highlight_regions(images[block.image_ref], block.focus_regions, cfg.highlight_width)


class _Card:
    """A measured card: optional image on top, wrapped text below."""

    def __init__(self, block: ReasoningBlock, index: int, width: int, cfg: RenderConfig,
                 image: AuxiliaryImage | None = None, max_image_h: int | None = None):
        self.block, self.index, self.width, self.cfg = block, index, width, cfg
        c = _chrome(cfg)
        inner = width - 2 * c
        if inner < raster.glyph_width(cfg.card_font_px):
            raise RenderInputError(f"card width {width}px leaves no room for text")
        self.image = None
        self.img_size = (0, 0)
        if image is not None:
            max_h = image.height if max_image_h is None else max(1, max_image_h)
            self.img_size = raster.fit_within(image.width, image.height, inner, max_h)
            self.image = raster.resize_nearest(image.pixels, *self.img_size)
        self.lines, self.text_h = measure_text(block.text, cfg.card_font_px, inner)
        h = 2 * c + self.img_size[1] + self.text_h
        if self.image is not None and self.lines:
            h += cfg.card_padding
        self.natural_height = h

    def draw(self, px: np.ndarray, x: int, y: int, height: int, layout: dict):
        cfg = self.cfg
        box = (x, y, x + self.width, y + height)
        raster.fill_rect(px, box, raster.WHITE)
        raster.stroke_rect(px, box, BORDER_PX, raster.BORDER)
        c = _chrome(cfg)
        cy = y + c
        if self.image is not None:
            raster.paste(px, self.image, x + c, cy)
            layout["image_boxes"].append([x + c, cy, x + c + self.img_size[0], cy + self.img_size[1]])
            cy += self.img_size[1] + (cfg.card_padding if self.lines else 0)
        adv = line_advance(cfg.card_font_px)
        for i, line in enumerate(self.lines):
            ly = cy + i * adv
            raster.draw_text(px, x + c, ly, line, cfg.card_font_px)
            layout["text_lines"].append({"x": x + c, "y": ly, "x_end": x + self.width - c,
                                         "font_px": cfg.card_font_px, "text": line})
        layout["cards"].append({"kind": self.block.kind, "block_index": self.index, "box": list(box)})
        return box


def _new_layout(strategy: str, width: int, height: int) -> dict:
    return {"strategy": strategy, "width": width, "height": height, "cards": [], "image_boxes": [],
            "image_box": None, "arrows": [], "font_px": None, "truncated": False, "text_lines": []}


def _finish(px, layout) -> Canvas:
    if layout["image_boxes"]:
        layout["image_box"] = layout["image_boxes"][0]
    return Canvas(px, layout)


def _as_list(img) -> list[AuxiliaryImage]:
    if img is None:
        return []
    if isinstance(img, AuxiliaryImage):
        return [img]
    return list(img)


def _check_blocks(blocks, images):
    for b in blocks:
        if b.kind not in ("text", "joint"):
            raise RenderInputError(f"unknown block kind {b.kind!r}")
        if b.kind == "joint":
            if b.image_ref is None or not 0 <= b.image_ref < len(images):
                raise RenderInputError(f"joint block references missing image {b.image_ref!r}")
        elif b.focus_regions:
            raise RenderInputError("focus regions are only valid on joint blocks")


# ----------------------------------------------------------------- vertical
def render_vertical(blocks: Sequence[ReasoningBlock], img=None, cfg: RenderConfig | None = None) -> Canvas:
    """Stack one card per block top to bottom, joined by downward arrows."""
    cfg = (cfg or RenderConfig(strategy="vertical")).validate()
    images = _as_list(img)
    if not blocks:
        raise RenderInputError("vertical layout needs at least one block")
    _check_blocks(blocks, images)
    p, g = cfg.outer_padding, cfg.gap
    prepared = {i: _prepared_image(b, images, cfg) for i, b in enumerate(blocks) if b.kind == "joint"}
    widest = max((im.width for im in prepared.values()), default=0)
    W = max(cfg.min_canvas_width, widest + 2 * p)
    cards = [_Card(b, i, W - 2 * p, cfg, prepared.get(i)) for i, b in enumerate(blocks)]
    H = 2 * p + sum(c.natural_height for c in cards) + g * (len(cards) - 1)
    px = raster.blank(W, H)
    layout = _new_layout("vertical", W, H)
    y = p
    boxes = []
    for card in cards:
        boxes.append(card.draw(px, p, y, card.natural_height, layout))
        y += card.natural_height + g
    cx = W // 2
    for a, b in zip(boxes, boxes[1:]):
        start, end = (cx, a[3]), (cx, b[1] - 1)
        raster.draw_arrow(px, start, end)
        layout["arrows"].append([*start, *end])
    return _finish(px, layout)


# --------------------------------------------------------------- compact-lr
def column_widths(cfg: RenderConfig) -> tuple[int, int]:
    free = cfg.canvas_width - 2 * cfg.outer_padding - cfg.column_gap
    left = free // 2
    return left, free - left


def render_compact_lr(text_blocks: Sequence[ReasoningBlock], joint_block: ReasoningBlock, img,
                      cfg: RenderConfig | None = None, joint_position: int | None = None) -> Canvas:
    """Image panel on the left, equal-height text cards on the right, bottom aligned.

    ``joint_position`` is the joint block's index in the chronological trace
    (default 1, i.e. right after the first text block); arrows follow that order.
    """
    cfg = (cfg or RenderConfig(strategy="compact-lr")).validate()
    images = _as_list(img)
    if not text_blocks:
        raise RenderInputError("compact-lr layout needs at least one text block")
    if joint_block.kind != "joint" or any(b.kind != "text" for b in text_blocks):
        raise RenderInputError("compact-lr layout needs exactly one joint block plus text blocks")
    _check_blocks([joint_block, *text_blocks], images)
    n = len(text_blocks)
    jpos = min(1, n) if joint_position is None else joint_position
    if not 0 <= jpos <= n:
        raise RenderInputError(f"joint_position {jpos} out of range for {n} text blocks")
    order = list(text_blocks[:jpos]) + [joint_block] + list(text_blocks[jpos:])

    m, gcol, gap = cfg.outer_padding, cfg.column_gap, cfg.row_gap
    W = cfg.canvas_width
    w_left, w_right = column_widths(cfg)
    c = _chrome(cfg)
    left = _Card(joint_block, jpos, w_left, cfg, _prepared_image(joint_block, images, cfg),
                 max_image_h=cfg.max_body_height - 2 * c)
    h_body = left.natural_height + cfg.lr_body_offset
    idx = [i for i in range(len(order)) if i != jpos]
    right = [_Card(b, i, w_right, cfg) for b, i in zip(text_blocks, idx)]
    h_row = max((h_body - (n - 1) * gap) // n, max(r.natural_height for r in right))
    col_h = n * h_row + (n - 1) * gap
    body = max(h_body, col_h, left.natural_height)
    H = 2 * m + body
    px = raster.blank(W, H)
    layout = _new_layout("compact-lr", W, H)
    layout["columns"] = {"left": w_left, "right": w_right, "row_height": h_row, "body_height": body}

    boxes = {jpos: left.draw(px, m, m, body, layout)}
    xr = m + w_left + gcol
    y = m + body - col_h
    for card in right:
        boxes[card.index] = card.draw(px, xr, y, h_row, layout)
        y += h_row + gap

    for a in range(len(order) - 1):
        b = a + 1
        ba, bb = boxes[a], boxes[b]
        if a != jpos and b != jpos:
            cx = xr + w_right // 2
            start, end = (cx, ba[3]), (cx, bb[1] - 1)
        elif b == jpos:
            cy = (ba[1] + ba[3]) // 2
            start, end = (xr - 1, cy), (m + w_left, cy)
        else:
            cy = (bb[1] + bb[3]) // 2
            start, end = (m + w_left, cy), (xr - 1, cy)
        raster.draw_arrow(px, start, end)
        layout["arrows"].append([*start, *end])
    return _finish(px, layout)


# --------------------------------------------------------------- fixed-wrap
def fixed_image_size(w: int, h: int, cfg: RenderConfig) -> tuple[int, int]:
    """Downscale so the image spans at most half the canvas in each direction."""
    s = min(Fraction(1), Fraction(cfg.fixed_width // 2, w), Fraction(cfg.fixed_height // 2, h))
    return max(1, int(w * s)), max(1, int(h * s))


def wrap_fixed(text: str, font_px: int, cfg: RenderConfig, img_box: Box):
    """Lines as ``(x, y, text)`` plus whether everything fits above the bottom padding.

    Rows whose glyph span [y, y+f) overlaps the image's vertical span start to the
    right of the image; other rows use the full padded width.
    """
    W, H, p, g = cfg.fixed_width, cfg.fixed_height, cfg.outer_padding, cfg.gap
    gw = raster.glyph_width(font_px)
    adv = line_advance(font_px)
    ix0, iy0, ix1, iy1 = img_box

    def geometry(i):
        y = p + i * adv
        if y < iy1 and y + font_px > iy0:
            x0 = ix1 + g
        else:
            x0 = p
        return x0, (W - p - x0) // gw

    wrapped = _wrap(text.split(), font_px, geometry)
    lines = [(x, p + i * adv, t) for i, (x, t) in enumerate(wrapped)]
    fits = all(y + font_px <= H - p for _, y, _ in lines)
    return lines, fits


def choose_font(text: str, cfg: RenderConfig, img_box: Box) -> tuple[int, bool]:
    """Largest font in range whose wrap fits; ``(font_min, True)`` when none does."""
    ink_chars = len("".join(text.split()))
    W, H, p = cfg.fixed_width, cfg.fixed_height, cfg.outer_padding
    for f in range(cfg.font_max, cfg.font_min - 1, -1):
        # cheap necessary condition: every non-space char needs a cell somewhere
        max_lines = max(0, (H - 2 * p - f) // line_advance(f) + 1)
        if ink_chars > max_lines * ((W - 2 * p) // raster.glyph_width(f)):
            continue
        if wrap_fixed(text, f, cfg, img_box)[1]:
            return f, False
    return cfg.font_min, True


def render_fixed_wrap(trace_text: str, img: AuxiliaryImage, cfg: RenderConfig | None = None) -> Canvas:
    cfg = (cfg or RenderConfig(strategy="fixed-wrap")).validate()
    if not trace_text or not trace_text.strip():
        raise RenderInputError("fixed-wrap layout needs non-empty trace text")
    W, H, p = cfg.fixed_width, cfg.fixed_height, cfg.outer_padding
    iw, ih = fixed_image_size(img.width, img.height, cfg)
    box = (p, H - p - ih, p + iw, H - p)
    f, truncated = choose_font(trace_text, cfg, box)
    lines, _ = wrap_fixed(trace_text, f, cfg, box)
    if truncated:
        lines = [ln for ln in lines if ln[1] + f <= H - p]

    px = raster.blank(W, H)
    raster.paste(px, raster.resize_nearest(img.pixels, iw, ih), box[0], box[1])
    layout = _new_layout("fixed-wrap", W, H)
    layout["image_boxes"].append(list(box))
    layout["font_px"] = f
    layout["truncated"] = truncated
    for x, y, t in lines:
        raster.draw_text(px, x, y, t, f)
        layout["text_lines"].append({"x": x, "y": y, "x_end": W - p, "font_px": f, "text": t})
    return _finish(px, layout)


# ----------------------------------------------------------------- dispatch
def trace_text(blocks: Sequence[ReasoningBlock]) -> str:
    return " ".join(b.text.strip() for b in blocks if b.text.strip())


def render(blocks: Sequence[ReasoningBlock], images, cfg: RenderConfig) -> Canvas:
    """Render a sample's trace and auxiliary images with ``cfg.strategy``."""
    cfg.validate()
    images = _as_list(images)
    blocks = list(blocks)
    _check_blocks(blocks, images)
    if cfg.strategy == "vertical":
        return render_vertical(blocks, images, cfg)
    joints = [i for i, b in enumerate(blocks) if b.kind == "joint"]
    if cfg.strategy == "compact-lr":
        if len(joints) != 1 or len(blocks) < 2:
            raise RenderInputError("compact-lr requires exactly one joint block and at least one text block")
        j = joints[0]
        texts = [b for b in blocks if b.kind == "text"]
        return render_compact_lr(texts, blocks[j], images, cfg, joint_position=j)
    if not images:
        raise RenderInputError("fixed-wrap requires an auxiliary image")
    if joints:
        jb = blocks[joints[0]]
        img = _prepared_image(jb, images, cfg)
    else:
        img = images[0]
    return render_fixed_wrap(trace_text(blocks), img, cfg)
