import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from canvas_oracle import boxes_intersect, check_invariants, random_sample
from latentcanvas.canvas import (AuxiliaryImage, ReasoningBlock, RenderConfig, RenderInputError, column_widths,
                                 highlight_regions, load_canvas, measure_text, read_canvas_text, render,
                                 render_compact_lr, render_fixed_wrap, render_vertical, save_canvas)
from latentcanvas.canvas.raster import read_ppm


def solid(w, h, v=200):
    return AuxiliaryImage(np.full((h, w, 3), v, dtype=np.uint8))


def stroke_mask(w, h, box, t=3):
    """Reference rasterizer: pixels within t of the inside edge of box."""
    x0, y0, x1, y1 = box
    ys, xs = np.mgrid[0:h, 0:w]
    inside = (xs >= x0) & (xs < x1) & (ys >= y0) & (ys < y1)
    edge = (xs < x0 + t) | (xs >= x1 - t) | (ys < y0 + t) | (ys >= y1 - t)
    return inside & edge


# ---------------------------------------------------------------- highlight
def test_highlight_empty_is_copy():
    img = AuxiliaryImage(np.random.default_rng(0).integers(0, 256, (20, 30, 3), dtype=np.uint8))
    out = highlight_regions(img, [])
    assert out.pixels.tobytes() == img.pixels.tobytes()
    assert out.pixels is not img.pixels


def test_highlight_one_box_changes_only_stroke():
    img = solid(40, 30, 10)
    box = (5, 4, 25, 20)
    out = highlight_regions(img, [box])
    diff = np.any(out.pixels != img.pixels, axis=2)
    np.testing.assert_array_equal(diff, stroke_mask(40, 30, box))
    assert np.all(out.pixels[diff] == [255, 0, 0])


def test_highlight_overlapping_union():
    img = solid(50, 50, 0)
    a, b = (2, 2, 30, 30), (20, 15, 48, 40)
    out = highlight_regions(img, [a, b])
    diff = np.any(out.pixels != img.pixels, axis=2)
    np.testing.assert_array_equal(diff, stroke_mask(50, 50, a) | stroke_mask(50, 50, b))
    assert highlight_regions(img, [a, b]).pixels.tobytes() == out.pixels.tobytes()


@pytest.mark.parametrize("box", [(-1, 0, 5, 5), (0, 0, 41, 5), (3, 3, 3, 8), (0, 0, 5, 31)])
def test_highlight_out_of_bounds(box):
    with pytest.raises(RenderInputError):
        highlight_regions(solid(40, 30), [box])


# ------------------------------------------------------------- measure_text
def test_measure_examples():
    assert measure_text("ab", 16, 1000) == (["ab"], 20)
    assert measure_text("ab", 32, 1000)[1] == 40
    # each word fills more than half of a 10-glyph line
    assert measure_text("abcdef ghijkl", 16, 80)[0] == ["abcdef", "ghijkl"]


def test_measure_hard_split_and_errors():
    lines, h = measure_text("abcdefghij", 16, 32)
    assert lines == ["abcd", "efgh", "ij"] and h == 60
    with pytest.raises(RenderInputError):
        measure_text("a", 16, 7)
    with pytest.raises(RenderInputError):
        measure_text("a", 0, 100)


# ----------------------------------------------------------------- vertical
def test_vertical_single_text_block():
    c = render_vertical([ReasoningBlock("text", "hello")], None, RenderConfig())
    assert c.width == 420 and c.layout["arrows"] == []


def test_vertical_height_formula():
    blocks = [ReasoningBlock("text", "one"), ReasoningBlock("text", "two words here " * 10),
              ReasoningBlock("text", "three")]
    c = render_vertical(blocks, None, RenderConfig())
    hs = [b["box"][3] - b["box"][1] for b in c.layout["cards"]]
    assert c.height == 48 + sum(hs) + 36
    assert len(c.layout["arrows"]) == 2


def test_vertical_image_width():
    blocks = [ReasoningBlock("text", "look"), ReasoningBlock("joint", "crop", 0)]
    c = render_vertical(blocks, solid(600, 50), RenderConfig())
    assert c.width == 648 and c.layout["width"] == 648


# --------------------------------------------------------------- compact-lr
def test_compact_columns():
    assert column_widths(RenderConfig()) == (730, 730)
    c = render_compact_lr([ReasoningBlock("text", "a")], ReasoningBlock("joint", "j", 0), solid(100, 80))
    assert c.layout["columns"]["left"] == 730 and c.layout["columns"]["right"] == 730


def test_compact_single_card_spans_body():
    c = render_compact_lr([ReasoningBlock("text", "a")], ReasoningBlock("joint", "j", 0), solid(300, 500))
    body = c.layout["columns"]["body_height"]
    right = [x["box"] for x in c.layout["cards"] if x["kind"] == "text"]
    left = [x["box"] for x in c.layout["cards"] if x["kind"] == "joint"]
    assert len(right) == 1 and right[0][3] - right[0][1] == body
    # bottom aligned
    assert right[0][3] == left[0][3]


def test_compact_arrow_order():
    t1, t2 = ReasoningBlock("text", "first"), ReasoningBlock("text", "second")
    j = ReasoningBlock("joint", "", 0)
    c = render([t1, j, t2], [solid(200, 200)], RenderConfig(strategy="compact-lr"))
    cards = {x["block_index"]: x["box"] for x in c.layout["cards"]}
    (a0, a1) = c.layout["arrows"]
    # right card 1 -> left panel: starts just left of card 1, ends at the panel edge
    assert a0[0] == cards[0][0] - 1 and a0[2] == cards[1][2] and cards[0][1] <= a0[1] < cards[0][3]
    # left panel -> right card 2
    assert a1[0] == cards[1][2] and a1[2] == cards[2][0] - 1 and cards[2][1] <= a1[3] < cards[2][3]


def test_compact_needs_text():
    with pytest.raises(RenderInputError):
        render_compact_lr([], ReasoningBlock("joint", "j", 0), solid(10, 10))
    with pytest.raises(RenderInputError, match="exactly one joint"):
        render([ReasoningBlock("text", "a")], [solid(5, 5)], RenderConfig(strategy="compact-lr"))


# --------------------------------------------------------------- fixed-wrap
def test_fixed_short_text_max_font():
    c = render_fixed_wrap("ok", solid(100, 100))
    assert c.layout["font_px"] == 80 and not c.layout["truncated"]
    assert (c.width, c.height) == (1024, 1024)


def test_fixed_overflow_truncates():
    c = render_fixed_wrap("word " * 5000, solid(100, 100))
    assert c.layout["font_px"] == 14 and c.layout["truncated"]
    assert all(ln["y"] + 14 <= 1000 for ln in c.layout["text_lines"])


def test_fixed_image_half_cap():
    c = render_fixed_wrap("x", solid(700, 700))
    x0, y0, x1, y1 = c.layout["image_box"]
    assert (x1 - x0, y1 - y0) == (512, 512)
    assert (x0, y1) == (24, 1000)


def test_fixed_empty_text_rejected():
    with pytest.raises(RenderInputError):
        render_fixed_wrap("   ", solid(10, 10))


# ----------------------------------------------------------------- dispatch
def test_dispatch_matches_direct_calls():
    rng = np.random.default_rng(3)
    blocks, imgs = random_sample(rng, n_text=2, joint_pos=1)
    v = render(blocks, imgs, RenderConfig(strategy="vertical"))
    assert v.pixels.tobytes() == render_vertical(blocks, imgs, RenderConfig()).pixels.tobytes()
    lr = render(blocks, imgs, RenderConfig(strategy="compact-lr"))
    direct = render_compact_lr([blocks[0], blocks[2]], blocks[1], imgs, RenderConfig(strategy="compact-lr"))
    assert lr.pixels.tobytes() == direct.pixels.tobytes() and lr.layout == direct.layout
    fw = render(blocks, imgs, RenderConfig(strategy="fixed-wrap"))
    hi = highlight_regions(imgs[0], blocks[1].focus_regions)
    text = " ".join(b.text for b in blocks if b.text.strip())
    assert fw.pixels.tobytes() == render_fixed_wrap(text, hi, RenderConfig(strategy="fixed-wrap")).pixels.tobytes()


def test_bad_strategy_and_refs():
    with pytest.raises(RenderInputError):
        render([ReasoningBlock("text", "a")], [], RenderConfig(strategy="diagonal"))
    with pytest.raises(RenderInputError):
        render([ReasoningBlock("joint", "a", 2)], [solid(4, 4)], RenderConfig())
    with pytest.raises(RenderInputError):
        RenderConfig(font_min=90).validate()


# --------------------------------------------------------------- invariants
@pytest.mark.parametrize("strategy", ["vertical", "compact-lr", "fixed-wrap"])
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_invariants_random(strategy, seed):
    rng = np.random.default_rng(seed)
    blocks, imgs = random_sample(rng)
    cfg = RenderConfig(strategy=strategy)
    c1 = render(blocks, imgs, cfg)
    c2 = render(blocks, imgs, cfg)
    assert c1.pixels.tobytes() == c2.pixels.tobytes()
    assert check_invariants(c1, cfg, blocks, imgs) == []


def test_boxes_intersect_helper():
    assert boxes_intersect((0, 0, 2, 2), (1, 1, 3, 3))
    assert not boxes_intersect((0, 0, 2, 2), (2, 0, 4, 2))


# ------------------------------------------------------------------ export
def test_export_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    blocks, imgs = random_sample(rng)
    c = render(blocks, imgs, RenderConfig(strategy="fixed-wrap"))
    ppm, side = save_canvas(c, tmp_path / "c0")
    assert ppm.read_bytes()[:2] == b"P6"
    back = load_canvas(tmp_path / "c0")
    assert back.pixels.tobytes() == c.pixels.tobytes()
    meta = json.loads(side.read_text())
    assert {"cards", "image_box", "arrows", "font_px", "truncated"} <= set(meta)
    png, _ = save_canvas(c, tmp_path / "c1", png=True)
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert read_ppm(ppm).shape == (1024, 1024, 3)


def test_canvas_text_reads_back():
    blocks = [ReasoningBlock("text", "locate the circle"), ReasoningBlock("joint", "zoom in", 0),
              ReasoningBlock("text", "the color is teal")]
    for strategy in ("vertical", "compact-lr", "fixed-wrap"):
        c = render(blocks, [solid(64, 64)], RenderConfig(strategy=strategy))
        assert read_canvas_text(c) == [ln["text"] for ln in c.layout["text_lines"]]
