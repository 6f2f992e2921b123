"""Run configuration: one JSON document, flag overrides, schema checks and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import fields
from pathlib import Path

from ..canvas.types import RenderConfig, RenderInputError
from ..dataset.filters import UPPER_MODES
from ..dataset.synth import GridConfig, GridConfigError
from ..encoder.pooling import POOL_VARIANTS
from ..inference.decode import PERTURB_KINDS
from ..model.transformer import ModelConfig, ModelConfigError
from ..training.loop import TF_MODES

CACHE_ENV = "LATENTCANVAS_CACHE"
CURRICULA = ("two-stage", "stage1-only", "single-mixed")


class ConfigError(ValueError):
    pass


def _grid_defaults():
    return {f.name: f.default for f in fields(GridConfig) if f.name != "palette"}


def _model_defaults():
    return {f.name: f.default for f in fields(ModelConfig) if f.name != "vocab_size"}


DEFAULTS = {
    "seed": 0,
    "paths": {"data": "data", "cache": "cache", "checkpoints": "checkpoints", "reports": "reports"},
    "gen": {"n": 3500, "seed": 0},
    "grid": _grid_defaults(),
    "filter": {"r_max": 4.0, "upper_mode": "canvas", "n_train": 2000, "n_test": 400},
    "render": {"strategy": "vertical", "overrides": {}},
    "encoder": {"d": 64, "seed": 1234},
    "pool_variant": "avg2d",
    "model": _model_defaults(),
    "k_train": 8,
    "k_infer": 4,
    "train": {"curriculum": "two-stage", "epochs": 1, "batch_size": 8, "lam": 0.1, "tf_mode": "full",
              "lr_backbone": 1e-3, "lr_head": 3e-3, "warmup_ratio": 0.05, "weight_decay": 0.1,
              "hard_ratio": 0.7, "ckpt_every": 50},
    "perturb": ["zero", "gaussian", "repeat-first"],
    "sweep": {"k": [0, 2, 4, 8, 12, 16], "lambda": [0.1, 0.3, 0.5, 0.7]},
}

# sections each step's output depends on; paths never enter a hash
STEP_SECTIONS = {
    "gen": ("gen", "grid"),
    "filter": ("gen", "grid", "filter", "render"),
    "render": ("gen", "grid", "filter", "render"),
    "targets": ("gen", "grid", "filter", "render", "encoder", "pool_variant", "k_train"),
    "train": ("gen", "grid", "filter", "render", "encoder", "pool_variant", "k_train", "model", "train", "seed"),
}


def _check(node, ref, path=""):
    if isinstance(ref, dict) and path not in ("render.overrides",):
        if not isinstance(node, dict):
            raise ConfigError(f"{path or '<root>'}: expected an object")
        for k in node:
            if k not in ref:
                raise ConfigError(f"{path + '.' if path else ''}{k}: unknown key")
        for k, v in node.items():
            _check(v, ref[k], f"{path}.{k}" if path else k)
        return
    if isinstance(ref, bool):
        ok = isinstance(node, bool)
    elif isinstance(ref, int):
        ok = isinstance(node, int) and not isinstance(node, bool)
    elif isinstance(ref, float):
        ok = isinstance(node, (int, float)) and not isinstance(node, bool)
    elif isinstance(ref, str):
        ok = isinstance(node, str)
    elif isinstance(ref, list):
        ok = isinstance(node, list)
    elif isinstance(ref, dict):
        ok = isinstance(node, dict)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{path}: expected {type(ref).__name__}, got {json.dumps(node)}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "overrides":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(item: str) -> tuple[list[str], object]:
    """``a.b=value``; value is JSON when it parses, else a bare string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key.path=value")
    key, raw = item.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key.strip().split("."), val


def apply_override(cfg: dict, keys, val) -> dict:
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise ConfigError(f"{'.'.join(keys)}: unknown key")
        node = node[k]
    if keys[-1] not in node and node is not cfg.get("render", {}).get("overrides"):
        raise ConfigError(f"{'.'.join(keys)}: unknown key")
    node[keys[-1]] = val
    return cfg


class RunConfig:
    """Resolved configuration. ``data`` is plain JSON; typed views are built on demand."""

    def __init__(self, data: dict, base_dir=None):
        self.data = data
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self.validate()

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        user = {}
        base = None
        if path:
            p = Path(path)
            try:
                user = json.loads(p.read_text())
            except FileNotFoundError:
                raise ConfigError(f"config file {p} does not exist") from None
            except json.JSONDecodeError as e:
                raise ConfigError(f"{p}: invalid JSON ({e})") from None
            base = p.parent
        _check(user, DEFAULTS)
        data = _merge(DEFAULTS, user)
        for item in overrides:
            apply_override(data, *parse_override(item))
        return cls(data, base)

    def validate(self):
        d = self.data
        _check(d, DEFAULTS)
        try:
            self.grid_config().validate()
        except GridConfigError as e:
            raise ConfigError(f"grid: {e}") from None
        try:
            self.render_config().validate()
        except (RenderInputError, TypeError) as e:
            raise ConfigError(f"render: {e}") from None
        try:
            self.model_config(64).validate()
        except ModelConfigError as e:
            raise ConfigError(f"model: {e}") from None
        if d["encoder"]["d"] != d["model"]["d_model"]:
            raise ConfigError("encoder.d: must equal model.d_model (features are injected as embeddings)")
        if d["filter"]["upper_mode"] not in UPPER_MODES:
            raise ConfigError(f"filter.upper_mode: must be one of {UPPER_MODES}")
        if d["pool_variant"] not in POOL_VARIANTS:
            raise ConfigError(f"pool_variant: must be one of {POOL_VARIANTS}")
        t = d["train"]
        if t["curriculum"] not in CURRICULA:
            raise ConfigError(f"train.curriculum: must be one of {CURRICULA}")
        if t["tf_mode"] not in TF_MODES:
            raise ConfigError(f"train.tf_mode: must be one of {TF_MODES}")
        if t["epochs"] < 1 or t["batch_size"] < 1:
            raise ConfigError("train.epochs and train.batch_size must be >= 1")
        if not 0 <= t["hard_ratio"] <= 1:
            raise ConfigError("train.hard_ratio: must be in [0, 1]")
        if t["lam"] < 0:
            raise ConfigError("train.lam: must be >= 0")
        for i, k in enumerate(d["perturb"]):
            if k not in PERTURB_KINDS:
                raise ConfigError(f"perturb[{i}]: must be one of {PERTURB_KINDS}")
        if d["k_train"] < 0 or d["k_infer"] < 0:
            raise ConfigError("k_train and k_infer must be >= 0")
        if any((not isinstance(k, int)) or k < 0 for k in d["sweep"]["k"]):
            raise ConfigError("sweep.k: must be non-negative integers")
        if d["filter"]["n_train"] < 1 or d["filter"]["n_test"] < 1:
            raise ConfigError("filter.n_train and filter.n_test must be >= 1")
        return self

    # typed views
    def grid_config(self) -> GridConfig:
        return GridConfig(**self.data["grid"])

    def render_config(self) -> RenderConfig:
        r = self.data["render"]
        return RenderConfig(strategy=r["strategy"], **r["overrides"])

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, **self.data["model"])

    def path(self, name: str) -> Path:
        if name == "cache" and os.environ.get(CACHE_ENV):
            return Path(os.environ[CACHE_ENV])
        p = Path(self.data["paths"][name])
        return p if p.is_absolute() else self.base_dir / p

    # hashing
    def digest(self, sections=None) -> str:
        d = self.data if sections is None else {k: self.data[k] for k in sections}
        d = {k: v for k, v in d.items() if k != "paths"}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def step_hash(self, step: str) -> str:
        return self.digest(STEP_SECTIONS[step])

    def to_json(self) -> str:
        return json.dumps(self.data, indent=1, sort_keys=True)
