"""Training step with latent teacher forcing and the staged curriculum."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..dataset.synth import stage_mixture
from ..model.tokenizer import Tokenizer
from ..model.transformer import Stream, ToyLM
from ..numerics.checkpoint import load_checkpoint, save_checkpoint
from ..numerics.optim import AdamW, CosineSchedule, ParamGroup
from ..numerics.tensor import Tensor, getitem, no_grad
from .losses import LossReport, align_loss, shifted_ce
from .sequence import Batch, build_sequence, collate

TF_MODES = ("full", "half-replay")
DIVERGENCE_LIMIT = 1e3


class TrainingError(RuntimeError):
    pass


class NonFiniteLoss(TrainingError):
    def __init__(self, msg, slot=None):
        super().__init__(msg)
        self.slot = slot


class Diverged(TrainingError):
    pass


class Interrupted(TrainingError):
    pass


def predict_latents(model: ToyLM, hidden, slots: np.ndarray) -> Tensor:
    """ẑ_k from the align-layer state at the entry preceding each slot: ``[B, K, d]``."""
    h = hidden[model.cfg.align_layer]
    rows = np.arange(slots.shape[0])[:, None]
    return model.head(getitem(h, (rows, slots - 1)))


def replay_inputs(model: ToyLM, batch: Batch) -> np.ndarray:
    """Continuous inputs for half-replay: first ceil(K/2) slots keep targets, later slots get
    detached predictions computed one slot at a time."""
    cont = batch.cont.copy()
    K = batch.slots.shape[1]
    rows = np.arange(batch.slots.shape[0])
    with no_grad():
        for k in range(math.ceil(K / 2), K):
            _, hidden = model(Stream(batch.ids, cont))
            z = predict_latents(model, hidden, batch.slots[:, k:k + 1]).data[:, 0]
            cont[rows, batch.slots[:, k]] = z
    return cont


def training_step(model: ToyLM, batch: Batch, lam: float, mode: str = "full") -> LossReport:
    """Forward + backward; gradients are left on the parameters."""
    if mode not in TF_MODES:
        raise ValueError(f"teacher-forcing mode must be one of {TF_MODES}")
    cont = batch.cont if mode == "full" else replay_inputs(model, batch)
    logits, hidden = model(Stream(batch.ids, cont))
    l_ce = shifted_ce(logits, batch.labels)
    K = batch.slots.shape[1]
    comps = {"mse_k": [], "cos_k": [], "zero_rows": 0}
    if K > 0:
        zhat = predict_latents(model, hidden, batch.slots)
        l_align, comps = align_loss(zhat, batch.targets)
        bad = ~np.isfinite(comps["per_slot"])
        if bad.any():
            slot = int(np.nonzero(bad.any(axis=0))[0][0])
            raise NonFiniteLoss(f"non-finite alignment loss at latent slot {slot + 1}", slot + 1)
        total = l_ce + l_align * lam
    else:
        l_align = None
        total = l_ce
    if not np.isfinite(total.data):
        raise NonFiniteLoss(f"non-finite loss (ce={float(l_ce.data)})")
    total.backward()
    la = 0.0 if l_align is None else float(l_align.data)
    return LossReport(float(l_ce.data), la, float(total.data), lam, comps["mse_k"], comps["cos_k"],
                      comps["zero_rows"])


# ----------------------------------------------------------------- curriculum
@dataclass
class StagePlan:
    name: str
    sources: tuple = ("stage1-aux",)
    epochs: int = 1
    k_train: int = 8
    lam: float = 0.1
    tf_mode: str = "full"
    hard_ratio: float | None = None
    batch_size: int = 8
    lr_backbone: float = 3e-4
    lr_head: float = 3e-3
    warmup_ratio: float = 0.05
    weight_decay: float = 0.1


@dataclass
class CurriculumPlan:
    stages: list = field(default_factory=list)
    seed: int = 0

    @classmethod
    def two_stage(cls, seed=0, **kw) -> "CurriculumPlan":
        hard = kw.pop("hard_ratio", 0.7)
        return cls([StagePlan("stage1", ("stage1-aux",), **kw),
                    StagePlan("stage2", ("stage2-canvas",), hard_ratio=hard, **kw)], seed)

    @classmethod
    def stage1_only(cls, seed=0, **kw) -> "CurriculumPlan":
        return cls([StagePlan("stage1", ("stage1-aux",), **kw)], seed)

    @classmethod
    def single_mixed(cls, seed=0, **kw) -> "CurriculumPlan":
        kw.pop("hard_ratio", None)
        return cls([StagePlan("mixed", ("stage1-aux", "stage2-canvas"), **kw)], seed)


def stage_sequences(examples, stage: StagePlan, stage_idx: int, seed: int, tok: Tokenizer, max_len: int):
    pool = examples
    if stage.hard_ratio is not None:
        pool = stage_mixture(examples, stage.hard_ratio, len(examples), seed=seed * 1000 + stage_idx)
    seqs = []
    for ex in pool:
        for src in stage.sources:
            seqs.append(build_sequence(ex, ex.targets[src], stage.k_train, tok, max_len))
    return seqs


def make_optimizer(model: ToyLM, stage: StagePlan, total_steps: int) -> AdamW:
    bb = model.backbone_parameters()
    hd = model.head_parameters()
    groups = [ParamGroup([n for n, _ in bb], [p for _, p in bb],
                         CosineSchedule(stage.lr_backbone, total_steps, stage.warmup_ratio))]
    if hd:
        groups.append(ParamGroup([n for n, _ in hd], [p for _, p in hd],
                                 CosineSchedule(stage.lr_head, total_steps, stage.warmup_ratio)))
    return AdamW(groups, weight_decay=stage.weight_decay)


def _optim_arrays(opt: AdamW) -> dict:
    out = {}
    for k, v in opt.state.m.items():
        out["opt.m." + k] = v
    for k, v in opt.state.v.items():
        out["opt.v." + k] = v
    return out


class Trainer:
    """Runs a curriculum; optional checkpointing every ``ckpt_every`` steps enables resume."""

    def __init__(self, model: ToyLM, tok: Tokenizer, plan: CurriculumPlan, log_path=None, ckpt_dir=None,
                 ckpt_every: int = 0, config_hash: str = "", stop_after: int | None = None):
        self.model, self.tok, self.plan = model, tok, plan
        self.log_path = Path(log_path) if log_path else None
        self.ckpt_dir = Path(ckpt_dir) if ckpt_dir else None
        self.ckpt_every = ckpt_every
        self.config_hash = config_hash
        self.stop_after = stop_after  # testing hook: simulate an interruption
        self.history: list[dict] = []

    # -- checkpoint helpers
    def _ckpt_path(self):
        return self.ckpt_dir / "last.ckpt"

    def save(self, opt: AdamW, stage_idx: int, step_in_stage: int, global_step: int):
        arrays = {"model." + k: v for k, v in self.model.state_dict().items()}
        arrays.update(_optim_arrays(opt))
        meta = {"stage_idx": stage_idx, "step_in_stage": step_in_stage, "global_step": global_step,
                "opt_step": opt.state.step}
        save_checkpoint(self._ckpt_path(), arrays, self.config_hash, meta)

    def _try_resume(self):
        if not self.ckpt_dir or not self._ckpt_path().exists():
            return None
        arrays, header = load_checkpoint(self._ckpt_path())
        if self.config_hash and header["config_hash"] != self.config_hash:
            raise TrainingError("checkpoint was written under a different config hash; refusing to resume")
        self.model.load_state_dict({k[6:]: v for k, v in arrays.items() if k.startswith("model.")})
        return arrays, header["meta"]

    def _log(self, rec: dict):
        self.history.append(rec)
        if self.log_path:
            with open(self.log_path, "a") as fh:
                fh.write(json.dumps(rec) + "\n")

    def run(self, examples) -> list[dict]:
        plan = self.plan
        resume = self._try_resume()
        start_stage, skip, global_step = 0, 0, 0
        if resume is not None:
            arrays, meta = resume
            start_stage, skip, global_step = meta["stage_idx"], meta["step_in_stage"], meta["global_step"]
            if self.log_path and self.log_path.exists():
                kept = [ln for ln in self.log_path.read_text().splitlines()
                        if ln.strip() and json.loads(ln)["step"] <= global_step]
                self.log_path.write_text("".join(ln + "\n" for ln in kept))
        elif self.log_path and self.log_path.exists():
            self.log_path.unlink()
        max_len = self.model.cfg.max_seq_len
        for si in range(start_stage, len(plan.stages)):
            stage = plan.stages[si]
            seqs = stage_sequences(examples, stage, si, plan.seed, self.tok, max_len)
            B = stage.batch_size
            per_epoch = math.ceil(len(seqs) / B)
            total = per_epoch * stage.epochs
            # fresh optimizer and schedule for every stage
            opt = make_optimizer(self.model, stage, total)
            if resume is not None and si == start_stage and skip > 0:
                arrays, meta = resume
                for k in opt.state.m:
                    opt.state.m[k] = arrays["opt.m." + k].copy()
                    opt.state.v[k] = arrays["opt.v." + k].copy()
                opt.state.step = meta["opt_step"]
            else:
                skip = 0
            step_in_stage = 0
            for epoch in range(stage.epochs):
                perm = np.random.default_rng([plan.seed, si, epoch]).permutation(len(seqs))
                for bi in range(per_epoch):
                    if step_in_stage < skip:
                        step_in_stage += 1
                        continue
                    idx = perm[bi * B:(bi + 1) * B]
                    batch = collate([seqs[i] for i in idx], self.tok.pad)
                    opt.zero_grad()
                    rep = training_step(self.model, batch, stage.lam, stage.tf_mode)
                    if not rep.total < DIVERGENCE_LIMIT:
                        raise Diverged(f"{stage.name} step {step_in_stage + 1}: loss {rep.total:.4g} "
                                       f"(ce={rep.l_ce:.4g}, align={rep.l_align:.4g}) exceeds {DIVERGENCE_LIMIT:g}")
                    lr = opt.groups[0].schedule.lr(opt.state.step + 1)
                    gnorm = opt.step()
                    step_in_stage += 1
                    global_step += 1
                    self._log({"step": global_step, "stage": stage.name, "l_ce": rep.l_ce, "l_align": rep.l_align,
                               "total": rep.total, "lr": lr, "grad_norm": gnorm})
                    if self.ckpt_dir and self.ckpt_every and global_step % self.ckpt_every == 0:
                        self.save(opt, si, step_in_stage, global_step)
                    if self.stop_after is not None and global_step >= self.stop_after:
                        raise Interrupted(f"stopped after step {global_step}")
            if self.ckpt_dir and self.ckpt_every:
                # stage boundary: next stage starts fresh
                self.save(opt, si + 1, 0, global_step)
        return self.history


def run_curriculum(plan: CurriculumPlan, examples, model: ToyLM, tok: Tokenizer, **kw) -> tuple[ToyLM, list]:
    hist = Trainer(model, tok, plan, **kw).run(examples)
    return model, hist


def plan_to_dict(plan: CurriculumPlan) -> dict:
    return {"seed": plan.seed, "stages": [asdict(s) for s in plan.stages]}


def plan_from_dict(d: dict) -> CurriculumPlan:
    stages = []
    for s in d["stages"]:
        s = dict(s)
        s["sources"] = tuple(s.get("sources", ("stage1-aux",)))
        stages.append(StagePlan(**s))
    return CurriculumPlan(stages, d.get("seed", 0))
