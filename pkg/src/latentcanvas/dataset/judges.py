"""Answer predictors used by the filters.

A judge is any callable ``judge(request) -> answer``. It may raise; filters
treat a raised exception as a judge failure for that sample.
"""

from __future__ import annotations

import json
import re
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..canvas.ocr import read_canvas_text
from ..canvas.raster import write_ppm
from ..canvas.types import AuxiliaryImage, Canvas
from .synth import DEFAULT_PALETTE


class JudgeError(RuntimeError):
    pass


@dataclass
class JudgeRequest:
    id: str
    question: str
    problem_image: AuxiliaryImage
    canvas: Canvas | None = None
    aux_images: list = field(default_factory=list)
    focus_regions: list = field(default_factory=list)


Judge = Callable[[JudgeRequest], str]


def oracle_judge(answers: dict[str, str]) -> Judge:
    def judge(req):
        return answers[req.id]
    return judge


def always_wrong_judge(req) -> str:
    return "\x00never"


def majority_color_judge(palette: dict | None = None, cell: int = 16) -> Judge:
    """Answers with the most common cell colour in the problem image, ties to palette order."""
    palette = palette or DEFAULT_PALETTE
    names = list(palette)
    rgb = np.array([palette[k] for k in names], dtype=np.int64)

    def judge(req):
        px = req.problem_image.pixels.astype(np.int64)
        c = cell // 2
        centres = px[c::cell, c::cell].reshape(-1, 3)
        counts = np.zeros(len(names), dtype=np.int64)
        for v in centres:
            hit = np.nonzero(np.all(rgb == v, axis=1))[0]
            if len(hit):
                counts[hit[0]] += 1
        return names[int(np.argmax(counts))]
    return judge


_ANSWER_RE = re.compile(r"\bthe (?:color|row|column) is (\S+)")


def canvas_text_judge(req) -> str:
    """Reads the canvas pixels back to text and extracts the stated answer."""
    if req.canvas is None:
        raise JudgeError("canvas judge needs a rendered canvas")
    text = " ".join(read_canvas_text(req.canvas))
    m = None
    for m in _ANSWER_RE.finditer(text):
        pass
    return m.group(1) if m else ""


def aux_focus_judge(palette: dict | None = None) -> Judge:
    """Reads the colour at the centre of the first focus region of the aux image."""
    palette = palette or DEFAULT_PALETTE
    names = list(palette)
    rgb = np.array([palette[k] for k in names], dtype=np.int64)

    def judge(req):
        if not req.aux_images or not req.focus_regions:
            raise JudgeError("aux judge needs an auxiliary image with a focus region")
        x0, y0, x1, y1 = req.focus_regions[0]
        v = req.aux_images[0].pixels[(y0 + y1) // 2, (x0 + x1) // 2].astype(np.int64)
        hit = np.nonzero(np.all(rgb == v, axis=1))[0]
        return names[hit[0]] if len(hit) else ""
    return judge


class ExternalJudge:
    """Child process speaking JSON lines: ``{id, question, image_path, canvas_path?}`` in, ``{id, answer}`` out."""

    def __init__(self, cmd: Sequence[str], max_in_flight: int = 8, timeout: float = 60.0):
        self.cmd = list(cmd)
        self.max_in_flight = max(1, max_in_flight)
        self.timeout = timeout

    def judge_many(self, requests: Sequence[JudgeRequest]) -> dict[str, str | Exception]:
        results: dict[str, str | Exception] = {}
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            lines = []
            for n, req in enumerate(requests):
                img = tmp / f"{n}.problem.ppm"
                write_ppm(img, req.problem_image.pixels)
                rec = {"id": req.id, "question": req.question, "image_path": str(img)}
                if req.canvas is not None:
                    cp = tmp / f"{n}.canvas.ppm"
                    write_ppm(cp, req.canvas.pixels)
                    rec["canvas_path"] = str(cp)
                lines.append(json.dumps(rec))
            try:
                proc = subprocess.Popen(self.cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)
            except OSError as e:
                return {r.id: JudgeError(f"cannot start judge: {e}") for r in requests}
            try:
                sent = 0
                received = 0
                while received < len(lines):
                    while sent < len(lines) and sent - received < self.max_in_flight:
                        proc.stdin.write(lines[sent] + "\n")
                        sent += 1
                    if not proc.stdin.closed:
                        proc.stdin.flush()
                        if sent == len(lines):
                            proc.stdin.close()
                    out = proc.stdout.readline()
                    if not out:
                        break
                    received += 1
                    try:
                        rec = json.loads(out)
                        results[str(rec["id"])] = str(rec["answer"])
                    except (json.JSONDecodeError, KeyError) as e:
                        results.setdefault(requests[received - 1].id, JudgeError(f"bad verdict line: {e}"))
            except BrokenPipeError:
                pass
            finally:
                if proc.stdin and not proc.stdin.closed:
                    proc.stdin.close()
                try:
                    proc.wait(timeout=self.timeout)
                except subprocess.TimeoutExpired:
                    proc.kill()
        for r in requests:
            results.setdefault(r.id, JudgeError("no verdict from external judge"))
        return results

    def __call__(self, req):
        res = self.judge_many([req])[req.id]
        if isinstance(res, Exception):
            raise res
        return res
