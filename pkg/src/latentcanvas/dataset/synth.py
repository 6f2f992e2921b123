"""Synthetic grid task: find the one circle among squares and report its colour."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..canvas.types import AuxiliaryImage, ReasoningBlock
from .schema import ReasoningSample

# red is reserved for focus highlights
DEFAULT_PALETTE = {
    "blue": (40, 70, 200),
    "green": (40, 160, 60),
    "orange": (240, 150, 30),
    "purple": (130, 50, 170),
    "teal": (20, 150, 150),
    "brown": (120, 80, 40),
}

QUESTION_KINDS = ("color", "row", "col")


class GridConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    grid: int = 4
    cell: int = 16
    zoom: int = 4
    context: int = 1
    circle_radius: float = 0.4375
    # small distractors keep the disc separable under a linear patch projection
    distractor_scale: float = 0.4
    decoy_scale: float = 1.0
    palette: dict = field(default_factory=lambda: dict(DEFAULT_PALETTE))
    question_kind: str = "color"
    hard_fraction: float = 0.7

    def validate(self):
        if self.grid < 2:
            raise GridConfigError("grid size must be >= 2")
        if len(self.palette) < 2:
            raise GridConfigError("palette needs at least 2 colours for a unique answer")
        if any(tuple(c) == (255, 0, 0) for c in self.palette.values()):
            raise GridConfigError("pure red is reserved for focus highlights")
        if any(tuple(c) == (255, 255, 255) for c in self.palette.values()):
            raise GridConfigError("white is the background colour")
        if len({tuple(c) for c in self.palette.values()}) != len(self.palette):
            raise GridConfigError("palette colours must be distinct")
        if self.question_kind not in QUESTION_KINDS:
            raise GridConfigError(f"question_kind must be one of {QUESTION_KINDS}")
        if self.context < 0 or self.zoom < 1:
            raise GridConfigError("context must be >= 0 and zoom >= 1")
        if not 0 < self.circle_radius <= 0.5:
            raise GridConfigError("circle_radius is a fraction of the cell in (0, 0.5]")
        if not (0 < self.distractor_scale <= 1 and 0 < self.decoy_scale <= 1):
            raise GridConfigError("distractor_scale and decoy_scale must be in (0, 1]")
        if self.cell < 6:
            raise GridConfigError("cells below 6 px cannot draw distinguishable shapes")
        return self


def _disc_mask(cell: int, radius: float = 0.4375) -> np.ndarray:
    c = (cell - 1) / 2.0
    r = min(cell * radius, cell / 2.0 - 1.0)
    ys, xs = np.mgrid[0:cell, 0:cell]
    return (ys - c) ** 2 + (xs - c) ** 2 <= r * r


def _square_mask(cell: int, scale: float = 1.0) -> np.ndarray:
    """Centred square; scale 1 leaves a 1-px margin."""
    side = max(2, int(round((cell - 2) * scale)))
    o = (cell - side) // 2
    m = np.zeros((cell, cell), dtype=bool)
    m[o:o + side, o:o + side] = True
    return m


def _diamond_mask(cell: int, scale: float = 1.0) -> np.ndarray:
    c = (cell - 1) / 2.0
    ys, xs = np.mgrid[0:cell, 0:cell]
    return np.abs(ys - c) + np.abs(xs - c) <= max(1.0, (cell / 2.0 - 1.0) * scale)


def draw_grid(colors: np.ndarray, shapes: np.ndarray, palette_rgb: np.ndarray, cell: int,
              circle_radius: float = 0.4375, distractor_scale: float = 1.0,
              decoy_scale: float = 1.0) -> np.ndarray:
    n = colors.shape[0]
    img = np.full((n * cell, n * cell, 3), 255, dtype=np.uint8)
    masks = {"square": _square_mask(cell, distractor_scale), "circle": _disc_mask(cell, circle_radius),
             "diamond": _diamond_mask(cell, decoy_scale)}
    for r in range(n):
        for c in range(n):
            tile = img[r * cell:(r + 1) * cell, c * cell:(c + 1) * cell]
            tile[masks[shapes[r, c]]] = palette_rgb[colors[r, c]]
    return img


def neighbourhood_crop(img: np.ndarray, row: int, col: int, cell: int, zoom: int, context: int = 1) -> np.ndarray:
    """Window of ``context`` cells around (row, col), white outside the grid, nearest-neighbour zoomed."""
    m = context * cell
    pad = np.full((img.shape[0] + 2 * m, img.shape[1] + 2 * m, 3), 255, dtype=np.uint8)
    pad[m:m + img.shape[0], m:m + img.shape[1]] = img
    span = (2 * context + 1) * cell
    crop = pad[row * cell:row * cell + span, col * cell:col * cell + span]
    return np.repeat(np.repeat(crop, zoom, axis=0), zoom, axis=1)


def majority_color(colors: np.ndarray, n_colors: int) -> int:
    """Most frequent palette index; ties go to the earlier palette entry."""
    return int(np.argmax(np.bincount(colors.ravel(), minlength=n_colors)))


def _question(kind: str) -> str:
    return {"color": "what is the color of the circle",
            "row": "which row is the circle in",
            "col": "which column is the circle in"}[kind]


def generate_grid_task(seed: int, n_samples: int, cfg: GridConfig | None = None,
                       id_prefix: str = "grid") -> list[ReasoningSample]:
    """Seed-deterministic samples; each draw uses its own child generator."""
    cfg = (cfg or GridConfig()).validate()
    names = list(cfg.palette)
    rgb = np.array([cfg.palette[k] for k in names], dtype=np.uint8)
    n, cell = cfg.grid, cfg.cell
    words = ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve"]
    root = np.random.SeedSequence(seed)
    out = []
    for i, child in enumerate(root.spawn(n_samples)):
        rng = np.random.default_rng(child)
        answer_idx = int(rng.integers(len(names)))
        colors = rng.integers(len(names), size=(n, n))
        tr, tc = int(rng.integers(n)), int(rng.integers(n))
        colors[tr, tc] = answer_idx
        hard = bool(rng.random() < cfg.hard_fraction)
        shapes = np.full((n, n), "square", dtype=object)
        if hard:
            # diamonds are decoys: close to a circle, never the target
            decoys = rng.random((n, n)) < 0.25
            shapes[decoys] = "diamond"
        shapes[tr, tc] = "circle"
        img = draw_grid(colors, shapes, rgb, cell, cfg.circle_radius, cfg.distractor_scale, cfg.decoy_scale)
        crop = neighbourhood_crop(img, tr, tc, cell, cfg.zoom, cfg.context)
        z = cell * cfg.zoom
        focus = (cfg.context * z, cfg.context * z, (cfg.context + 1) * z, (cfg.context + 1) * z)
        rw = words[tr] if tr < len(words) else str(tr + 1)
        cw = words[tc] if tc < len(words) else str(tc + 1)
        if cfg.question_kind == "color":
            answer = names[answer_idx]
            final = f"the color is {answer}"
        elif cfg.question_kind == "row":
            answer = rw
            final = f"the row is {answer}"
        else:
            answer = cw
            final = f"the column is {answer}"
        trace = [
            ReasoningBlock("text", "locate the circle among the squares"),
            ReasoningBlock("joint", f"zoom into row {rw} column {cw}", 0, [focus]),
            ReasoningBlock("text", final),
        ]
        maj = majority_color(colors, len(names))
        meta = {"task": "grid", "difficulty": "hard" if hard else "foundational",
                "target": [tr, tc], "majority_color": names[maj], "color": names[answer_idx],
                "question_kind": cfg.question_kind}
        out.append(ReasoningSample(f"{id_prefix}-{seed}-{i:06d}", _question(cfg.question_kind),
                                   AuxiliaryImage(img), trace, [AuxiliaryImage(crop)], answer, meta).validate())
    return out


def stage_mixture(samples, hard_ratio: float, n: int, seed: int) -> list:
    """Draw ``n`` samples (with replacement) so hard:foundational follows ``hard_ratio``.

    Falls back to the other pool when one pool is empty.
    """
    hard = [s for s in samples if s.meta.get("difficulty") == "hard"]
    easy = [s for s in samples if s.meta.get("difficulty") != "hard"]
    if not samples:
        return []
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        pool = hard if (rng.random() < hard_ratio and hard) or not easy else easy
        out.append(pool[int(rng.integers(len(pool)))])
    return out
