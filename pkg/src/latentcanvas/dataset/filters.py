"""Three-stage sample filtering: lower bound, upper bound, aspect ratio."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

from ..canvas.layout import render
from ..canvas.types import RenderConfig
from .judges import JudgeRequest

log = logging.getLogger(__name__)

UPPER_MODES = ("canvas", "aux")


def normalize_answer(a) -> str:
    return " ".join(str(a).strip().lower().split())


def _judge_all(judge, requests) -> dict:
    if hasattr(judge, "judge_many"):
        return judge.judge_many(requests)
    out = {}
    for r in requests:
        try:
            out[r.id] = judge(r)
        except Exception as e:  # judge failures are recorded per sample
            out[r.id] = e
    return out


def _split(samples, verdicts, reject_label):
    kept = [s for s in samples if verdicts[s.id] != reject_label]
    rejected = [s for s in samples if verdicts[s.id] == reject_label]
    return kept, rejected


def lower_bound_verdicts(samples, judge) -> dict[str, str]:
    reqs = [JudgeRequest(s.id, s.question, s.problem_image) for s in samples]
    answers = _judge_all(judge, reqs)
    verdicts = {}
    for s in samples:
        a = answers[s.id]
        if isinstance(a, Exception):
            log.warning("lower-bound judge failed on %s: %s (kept)", s.id, a)
            verdicts[s.id] = "error-kept"
        elif normalize_answer(a) == normalize_answer(s.answer):
            verdicts[s.id] = "rejected-lower"
        else:
            verdicts[s.id] = "kept"
    return verdicts


def filter_lower_bound(samples, judge):
    """Drop samples the judge already answers from the question and problem image alone."""
    return _split(samples, lower_bound_verdicts(samples, judge), "rejected-lower")


def upper_bound_verdicts(samples, judge, render_cfg: RenderConfig | None = None, mode: str = "canvas"):
    if mode not in UPPER_MODES:
        raise ValueError(f"upper-bound mode must be one of {UPPER_MODES}")
    render_cfg = render_cfg or RenderConfig()
    reqs = []
    truncated = set()
    for s in samples:
        if mode == "canvas":
            c = render(s.trace, s.aux_images, render_cfg)
            if c.layout["truncated"]:
                truncated.add(s.id)
            reqs.append(JudgeRequest(s.id, s.question, s.problem_image, canvas=c))
        else:
            focus = [r for b in s.trace if b.kind == "joint" for r in b.focus_regions]
            reqs.append(JudgeRequest(s.id, s.question, s.problem_image, aux_images=s.aux_images,
                                     focus_regions=focus))
    answers = _judge_all(judge, reqs)
    verdicts = {}
    for s in samples:
        a = answers[s.id]
        if isinstance(a, Exception):
            log.warning("upper-bound judge failed on %s: %s (kept)", s.id, a)
            verdicts[s.id] = "error-kept"
        elif s.id in truncated or normalize_answer(a) != normalize_answer(s.answer):
            verdicts[s.id] = "rejected-upper"
        else:
            verdicts[s.id] = "kept"
    return verdicts


def filter_upper_bound(samples, strong_judge, render_cfg: RenderConfig | None = None, mode: str = "canvas"):
    """Drop samples the strong judge still gets wrong given the reasoning evidence.

    In canvas mode a truncated canvas also counts as unsolvable.
    """
    return _split(samples, upper_bound_verdicts(samples, strong_judge, render_cfg, mode), "rejected-upper")


def aspect_ok(img, r_max: float) -> bool:
    return max(img.width, img.height) <= r_max * min(img.width, img.height)


def filter_aspect_ratio(samples, r_max: float = 4.0):
    if not r_max > 1:
        raise ValueError("r_max must be > 1")
    kept = [s for s in samples if all(aspect_ok(a, r_max) for a in s.aux_images)]
    ids = {s.id for s in kept}
    return kept, [s for s in samples if s.id not in ids]


@dataclass
class FilterReport:
    input: int = 0
    rejected_lower: int = 0
    rejected_upper: int = 0
    rejected_aspect: int = 0
    retained: int = 0
    judge_errors: int = 0
    verdicts: dict = field(default_factory=dict)

    def reconciles(self) -> bool:
        return self.retained + self.rejected_lower + self.rejected_upper + self.rejected_aspect == self.input

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


def run_filter_pipeline(samples, lower_judge, upper_judge, r_max: float = 4.0,
                        render_cfg: RenderConfig | None = None, upper_mode: str = "canvas"):
    """lower -> upper -> aspect; returns ``(kept, FilterReport)`` with kept in input order."""
    samples = list(samples)
    rep = FilterReport(input=len(samples))
    lower = lower_bound_verdicts(samples, lower_judge)
    stage = []
    for s in samples:
        v = lower[s.id]
        rep.verdicts[s.id] = v
        rep.judge_errors += v == "error-kept"
        if v == "rejected-lower":
            rep.rejected_lower += 1
        else:
            stage.append(s)
    upper = upper_bound_verdicts(stage, upper_judge, render_cfg, upper_mode)
    stage2 = []
    for s in stage:
        v = upper[s.id]
        rep.judge_errors += v == "error-kept"
        if v == "rejected-upper":
            rep.rejected_upper += 1
            rep.verdicts[s.id] = v
        else:
            stage2.append(s)
    kept, rejected = filter_aspect_ratio(stage2, r_max)
    for s in rejected:
        rep.verdicts[s.id] = "rejected-aspect"
    for s in kept:
        errored = "error-kept" in (lower[s.id], upper[s.id])
        rep.verdicts[s.id] = "error-kept" if errored else "kept"
    rep.rejected_aspect = len(rejected)
    rep.retained = len(kept)
    return kept, rep
