"""Plain-file reports: JSONL records, CSV tables and a small SVG line chart."""

from __future__ import annotations

import csv
import json
from pathlib import Path


def write_jsonl(path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    return path


def write_csv(path, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = list(rows)
    cols = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)
    return path


def line_chart_svg(path, xs, ys, xlabel="latent budget K", ylabel="accuracy", width=480, height=320,
                   stamp: str = "") -> Path:
    """Minimal dependency-free chart; y is clamped to [0, 1]. ``stamp`` goes into an XML comment."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pad = 48
    x0, x1 = min(xs), max(xs)
    span = (x1 - x0) or 1

    def px(x):
        return pad + (x - x0) / span * (width - 2 * pad)

    def py(y):
        return height - pad - min(max(y, 0.0), 1.0) * (height - 2 * pad)

    pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, ys))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             *([f"<!-- {stamp} -->"] if stamp else []),
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
             f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
             f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>']
    for x, y in zip(xs, ys):
        parts.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="steelblue"/>')
        parts.append(f'<text x="{px(x):.1f}" y="{height - pad + 16}" font-size="11" text-anchor="middle">{x}</text>')
    for t in (0.0, 0.5, 1.0):
        parts.append(f'<text x="{pad - 6}" y="{py(t) + 4:.1f}" font-size="11" text-anchor="end">{t:.1f}</text>')
    parts.append(f'<text x="{width / 2}" y="{height - 8}" font-size="12" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="14" y="{height / 2}" font-size="12" text-anchor="middle" '
                 f'transform="rotate(-90 14 {height / 2})">{ylabel}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")
    return path
