from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

Box = tuple[int, int, int, int]  # x0, y0, x1, y1 with exclusive ends

STRATEGIES = ("vertical", "compact-lr", "fixed-wrap")


class RenderInputError(ValueError):
    pass


@dataclass
class AuxiliaryImage:
    """RGB uint8 raster, ``pixels[y, x, c]``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise RenderInputError(f"expected a non-empty HxWx3 raster, got shape {px.shape}")
        self.pixels = np.ascontiguousarray(px, dtype=np.uint8)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def copy(self) -> "AuxiliaryImage":
        return AuxiliaryImage(self.pixels.copy())


@dataclass
class ReasoningBlock:
    kind: Literal["text", "joint"]
    text: str
    image_ref: int | None = None
    focus_regions: list[Box] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "text": self.text, "image_ref": self.image_ref,
                "focus_regions": [list(b) for b in self.focus_regions]}

    @classmethod
    def from_dict(cls, d: dict) -> "ReasoningBlock":
        return cls(d["kind"], d["text"], d.get("image_ref"), [tuple(b) for b in d.get("focus_regions") or []])


@dataclass
class RenderConfig:
    strategy: str = "vertical"
    # vertical
    min_canvas_width: int = 420
    outer_padding: int = 24
    gap: int = 18
    # compact left-right
    canvas_width: int = 1536
    max_body_height: int = 1180
    column_gap: int = 28
    row_gap: int = 12
    lr_body_offset: int = 0
    # fixed canvas
    fixed_width: int = 1024
    fixed_height: int = 1024
    font_min: int = 14
    font_max: int = 80
    # cards and decoration
    card_font_px: int = 16
    card_padding: int = 8
    highlight_width: int = 3

    def validate(self):
        if self.strategy not in STRATEGIES:
            raise RenderInputError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        for k, v in asdict(self).items():
            if isinstance(v, int) and k != "lr_body_offset" and v <= 0:
                raise RenderInputError(f"render config {k} must be > 0, got {v}")
        if self.font_min > self.font_max:
            raise RenderInputError("font_min must not exceed font_max")
        return self


@dataclass
class Canvas:
    pixels: np.ndarray
    layout: dict

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]
