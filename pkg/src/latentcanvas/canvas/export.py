from __future__ import annotations

import json
from pathlib import Path

from . import raster
from .types import Canvas


def save_canvas(canvas: Canvas, path, png: bool = False) -> tuple[Path, Path]:
    """Write ``<stem>.ppm`` (or ``.png``) plus a ``<stem>.json`` layout sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    img_path = path.with_suffix(".png" if png else ".ppm")
    (raster.write_png if png else raster.write_ppm)(img_path, canvas.pixels)
    side = path.with_suffix(".json")
    side.write_text(json.dumps(canvas.layout, indent=1, sort_keys=True))
    return img_path, side


def load_canvas(path) -> Canvas:
    path = Path(path)
    px = raster.read_ppm(path.with_suffix(".ppm"))
    layout = json.loads(path.with_suffix(".json").read_text())
    return Canvas(px, layout)
