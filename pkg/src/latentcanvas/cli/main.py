"""``latentcanvas`` command line: gen -> filter -> render -> targets -> train -> {eval, perturb, sweep, dump}.

Exit codes: 0 success, 2 config error, 3 missing dependency artifact, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import contextlib
import copy
import hashlib
import json
import logging
import os
import shutil
import sys
from pathlib import Path


from ..canvas.export import save_canvas
from ..canvas.layout import render
from ..canvas.types import RenderInputError
from ..dataset.filters import run_filter_pipeline
from ..dataset.judges import canvas_text_judge, majority_color_judge
from ..dataset.schema import SampleError, read_samples, write_samples
from ..dataset.synth import GridConfigError, generate_grid_task
from ..encoder.cache import TargetCache
from ..encoder.vision import EncoderConfig, ToyVisionEncoder
from ..inference.decode import InferenceError, PerturbSpec
from ..inference.evaluate import evaluate, hidden_state_dump, sweep_latent_budget
from ..inference.reports import line_chart_svg, write_csv, write_jsonl
from ..model.tokenizer import Tokenizer
from ..model.transformer import ModelConfigError, ToyLM, default_donors, init_control_embeddings
from ..numerics.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from ..numerics.optim import NonFiniteGradient
from ..training.data import STAGE_SOURCES, build_tokenizer, compute_targets, prepare_examples
from ..training.loop import CurriculumPlan, Diverged, Interrupted, NonFiniteLoss, Trainer, TrainingError
from .config import ConfigError, RunConfig

log = logging.getLogger("latentcanvas")

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC = 0, 2, 3, 4
STAGE_ALIASES = {"1": ("stage1-aux",), "2": ("stage2-canvas",), "all": STAGE_SOURCES}


class MissingArtifact(RuntimeError):
    pass


class LockError(RuntimeError):
    pass


# ---------------------------------------------------------------- plumbing
@contextlib.contextmanager
def output_lock(directory: Path):
    """One writer per output directory (O_EXCL lock file)."""
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError(f"{directory} is locked by another writer (remove {lock} if that process died)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _write_json(path: Path, obj) -> Path:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
    tmp.replace(path)
    return path


def _manifest_ok(path: Path, step_hash: str) -> bool:
    if not path.exists():
        return False
    m = json.loads(path.read_text())
    return m.get("config_hash") == step_hash and all(Path(p).exists() for p in m.get("outputs", []))


def _manifest(path: Path, cfg: RunConfig, step: str, outputs, **extra):
    rec = {"step": step, "config_hash": cfg.step_hash(step), "run_hash": cfg.digest(),
           "outputs": [str(p) for p in outputs], **extra}
    return _write_json(path, rec)


def file_id(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _samples_path(cfg):
    return cfg.path("data") / "samples.jsonl"


def _load_samples(cfg):
    p = _samples_path(cfg)
    if not p.exists():
        raise MissingArtifact(f"{p} not found; run `latentcanvas gen` first")
    return read_samples(p)


def _load_splits(cfg):
    p = cfg.path("data") / "splits.json"
    if not p.exists():
        raise MissingArtifact(f"{p} not found; run `latentcanvas filter` first")
    splits = json.loads(p.read_text())
    by_id = {s.id: s for s in _load_samples(cfg)}
    try:
        return {k: [by_id[i] for i in ids] for k, ids in splits.items() if k in ("train", "test")}
    except KeyError as e:
        raise MissingArtifact(f"split id {e} is not in {_samples_path(cfg)}; re-run `latentcanvas filter`") from None


def _encoder(cfg):
    e = cfg.data["encoder"]
    return ToyVisionEncoder(EncoderConfig(d=e["d"], seed=e["seed"]))


def cache_dir(cfg) -> Path:
    # targets depend on everything upstream of the cache key (id, stage, K, encoder seed)
    return cfg.path("cache") / cfg.digest(("gen", "grid", "filter", "render", "encoder", "pool_variant"))


def _sources(curriculum: str):
    return ("stage1-aux",) if curriculum == "stage1-only" else STAGE_SOURCES


# ---------------------------------------------------------------- data steps
def cmd_gen(cfg: RunConfig) -> dict:
    out = _samples_path(cfg)
    man = out.parent / "gen.manifest.json"
    if _manifest_ok(man, cfg.step_hash("gen")):
        log.info("gen: up to date (%s)", out)
        return json.loads(man.read_text())
    g = cfg.data["gen"]
    with output_lock(out.parent):
        img_dir = out.parent / (out.stem + "_images")
        try:
            samples = generate_grid_task(g["seed"], g["n"], cfg.grid_config())
            if img_dir.exists():
                shutil.rmtree(img_dir)
            write_samples(out, samples)
        except BaseException:
            shutil.rmtree(img_dir, ignore_errors=True)
            out.unlink(missing_ok=True)
            out.with_suffix(out.suffix + ".tmp").unlink(missing_ok=True)
            raise
        _manifest(man, cfg, "gen", [out], n=len(samples), file_id=file_id(out))
    log.info("gen: wrote %d samples to %s", len(samples), out)
    return json.loads(man.read_text())


def cmd_filter(cfg: RunConfig) -> dict:
    d = cfg.path("data")
    man = d / "filter.manifest.json"
    if _manifest_ok(man, cfg.step_hash("filter")):
        log.info("filter: up to date")
        return json.loads(man.read_text())
    samples = _load_samples(cfg)
    f = cfg.data["filter"]
    g = cfg.grid_config()
    kept, rep = run_filter_pipeline(samples, majority_color_judge(g.palette, g.cell), canvas_text_judge,
                                    f["r_max"], cfg.render_config(), f["upper_mode"])
    need = f["n_train"] + f["n_test"]
    if len(kept) < need:
        raise ConfigError(f"filter: only {len(kept)} of {len(samples)} samples kept but "
                          f"filter.n_train + filter.n_test = {need}; raise gen.n")
    splits = {"train": [s.id for s in kept[:f["n_train"]]], "test": [s.id for s in kept[f["n_train"]:need]]}
    with output_lock(d):
        sp = _write_json(d / "splits.json", splits)
        rp = d / "filter_report.json"
        rp.write_text(rep.to_json() + "\n")
        _manifest(man, cfg, "filter", [sp, rp], retained=rep.retained, reconciles=rep.reconciles())
    log.info("filter: %d in, %d kept (lower %d, upper %d, aspect %d)", rep.input, rep.retained,
             rep.rejected_lower, rep.rejected_upper, rep.rejected_aspect)
    return json.loads(man.read_text())


def cmd_render(cfg: RunConfig) -> dict:
    rc = cfg.render_config()
    out_dir = cfg.path("data") / "canvases" / rc.strategy
    man = out_dir / "render.manifest.json"
    if _manifest_ok(man, cfg.step_hash("render")):
        log.info("render: up to date (%s)", out_dir)
        return json.loads(man.read_text())
    splits = _load_splits(cfg)
    with output_lock(out_dir):
        written = []
        try:
            for s in splits["train"] + splits["test"]:
                c = render(s.trace, s.aux_images, rc)
                img, side = save_canvas(c, out_dir / s.id)
                written += [img, side]
        except BaseException:
            for p in written:
                p.unlink(missing_ok=True)
            raise
        _manifest(man, cfg, "render", [out_dir], n=len(written) // 2)
    log.info("render: %d canvases under %s", len(written) // 2, out_dir)
    return json.loads(man.read_text())


def cmd_targets(cfg: RunConfig, stage: str = "all") -> dict:
    if stage not in STAGE_ALIASES:
        raise ConfigError(f"--stage must be one of {sorted(STAGE_ALIASES)}")
    k = cfg.data["k_train"]
    splits = _load_splits(cfg)
    enc = _encoder(cfg)
    root = cache_dir(cfg)
    rc = cfg.render_config()
    added = 0
    with output_lock(root):
        cache = TargetCache(root, "train")
        for s in splits["train"]:
            for src in STAGE_ALIASES[stage]:
                if (s.id, src, k, enc.cfg.seed) in cache:
                    continue
                cache.put(s.id, src, enc.cfg.seed, compute_targets(s, enc, src, k, rc, cfg.data["pool_variant"]))
                added += 1
    _write_json(root / "targets.manifest.json",
                {"step": "targets", "config_hash": cfg.step_hash("targets"), "cache": str(root),
                 "k": k, "stage": stage, "rows": len(cache)})
    log.info("targets: %d new entries (K=%d, stage %s) in %s", added, k, stage, root)
    return {"cache": str(root), "added": added, "entries": len(cache)}


# ---------------------------------------------------------------- training
def _plan(cfg: RunConfig) -> CurriculumPlan:
    t = cfg.data["train"]
    kw = dict(epochs=t["epochs"], k_train=cfg.data["k_train"], lam=t["lam"], tf_mode=t["tf_mode"],
              batch_size=t["batch_size"], lr_backbone=t["lr_backbone"], lr_head=t["lr_head"],
              warmup_ratio=t["warmup_ratio"], weight_decay=t["weight_decay"], hard_ratio=t["hard_ratio"])
    ctor = {"two-stage": CurriculumPlan.two_stage, "stage1-only": CurriculumPlan.stage1_only,
            "single-mixed": CurriculumPlan.single_mixed}[t["curriculum"]]
    return ctor(seed=cfg.data["seed"], **kw)


def cmd_train(cfg: RunConfig, stop_after: int | None = None) -> dict:
    ck = cfg.path("checkpoints")
    card_path = ck / "model_card.json"
    h = cfg.step_hash("train")
    if card_path.exists() and (ck / "model.ckpt").exists():
        card = json.loads(card_path.read_text())
        if card.get("config_hash") == h:
            log.info("train: up to date (%s)", ck)
            return card
    splits = _load_splits(cfg)
    k = cfg.data["k_train"]
    enc = _encoder(cfg)
    sources = _sources(cfg.data["train"]["curriculum"])
    root = cache_dir(cfg)
    cache = TargetCache(root, "train") if root.exists() else None
    for src in sources:
        missing = sum(cache is None or (s.id, src, k, enc.cfg.seed) not in cache for s in splits["train"])
        if missing:
            st = "1" if src == "stage1-aux" else "2"
            raise MissingArtifact(f"latent targets for {src} (K={k}) missing for {missing} training samples; "
                                  f"run `latentcanvas targets --stage {st}` with the same config")
    tok = build_tokenizer(splits["train"])
    examples = prepare_examples(splits["train"], enc, tok, k, sources, cfg.render_config(),
                                cfg.data["pool_variant"], cache, enc.cfg.seed)
    model = ToyLM(cfg.model_config(len(tok)))
    init_control_embeddings(model, tok.controls, default_donors(tok))
    with output_lock(ck):
        last = ck / "last.ckpt"
        if last.exists():
            try:
                stale = load_checkpoint(last)[1]["config_hash"] != h
            except CheckpointError:
                stale = True
            if stale:
                log.warning("train: discarding checkpoint from a different config")
                last.unlink()
        if not last.exists():
            _write_json(ck / "run_config.json", cfg.data)
        trainer = Trainer(model, tok, _plan(cfg), log_path=ck / "metrics.jsonl", ckpt_dir=ck,
                          ckpt_every=cfg.data["train"]["ckpt_every"], config_hash=h, stop_after=stop_after)
        hist = trainer.run(examples)
        meta = {"vocab": tok.vocab, "model": cfg.data["model"], "vocab_size": len(tok)}
        save_checkpoint(ck / "model.ckpt", model.state_dict(), h, meta)
        final = {k_: v for k_, v in hist[-1].items()} if hist else {}
        card = {"config_hash": h, "run_hash": cfg.digest(), "checkpoint_id": file_id(ck / "model.ckpt"),
                "curriculum": cfg.data["train"]["curriculum"], "steps": len(hist) and hist[-1]["step"],
                "n_train": len(examples), "k_train": k, "lambda": cfg.data["train"]["lam"],
                "model": cfg.data["model"], "vocab_size": len(tok), "final": final}
        _write_json(card_path, card)
    log.info("train: %s steps, final l_ce %.4f", card["steps"], final.get("l_ce", float("nan")))
    return card


# ---------------------------------------------------------------- inference
def load_trained(cfg: RunConfig, ck: Path | None = None):
    ck = ck or cfg.path("checkpoints")
    p = ck / "model.ckpt"
    if not p.exists():
        raise MissingArtifact(f"{p} not found; run `latentcanvas train` first")
    arrays, header = load_checkpoint(p)
    tok = Tokenizer.from_json(json.dumps(header["meta"]["vocab"]))
    model = ToyLM(cfg.model_config(len(tok)))
    want = model.state_dict()
    bad = [n for n in want if n not in arrays or arrays[n].shape != want[n].shape]
    if bad or set(arrays) != set(want):
        raise ConfigError(f"checkpoint {p} does not match model config (first mismatch: "
                          f"{(bad or sorted(set(arrays) ^ set(want)))[0]}); check the model section")
    model.load_state_dict(arrays)
    return model, tok, file_id(p)


def load_test_examples(cfg, tok):
    splits = _load_splits(cfg)
    return prepare_examples(splits["test"], _encoder(cfg), tok, 0, sources=())


def _stamp(rows, h, cid):
    return [{**r, "config_hash": h, "checkpoint_id": cid} for r in rows]


def _reports(cfg) -> Path:
    p = cfg.path("reports")
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_eval(cfg: RunConfig) -> dict:
    model, tok, cid = load_trained(cfg)
    k = cfg.data["k_infer"]
    m, recs = evaluate(model, tok, load_test_examples(cfg, tok), k, PerturbSpec("none"), cfg.data["seed"])
    out = _reports(cfg)
    h = cfg.digest()
    with output_lock(out):
        write_jsonl(out / f"eval_k{k}.jsonl", _stamp(recs, h, cid))
        _write_json(out / f"eval_k{k}.json", {**m, "config_hash": h, "checkpoint_id": cid})
    log.info("eval: K=%d accuracy %.4f over %d", k, m["accuracy"], m["n"])
    return m


def cmd_perturb(cfg: RunConfig) -> list[dict]:
    model, tok, cid = load_trained(cfg)
    k = cfg.data["k_infer"]
    test = load_test_examples(cfg, tok)
    rows = []
    for kind in ["none"] + [p for p in cfg.data["perturb"] if p != "none"]:
        m, _ = evaluate(model, tok, test, k, PerturbSpec(kind), cfg.data["seed"])
        rows.append({"perturb": kind, "k_infer": k, "accuracy": m["accuracy"], "n": m["n"]})
        log.info("perturb: %-12s accuracy %.4f", kind, m["accuracy"])
    out = _reports(cfg)
    with output_lock(out):
        write_csv(out / f"perturb_k{k}.csv", _stamp(rows, cfg.digest(), cid))
    return rows


def cmd_sweep_k(cfg: RunConfig) -> list[dict]:
    model, tok, cid = load_trained(cfg)
    rows = sweep_latent_budget(model, tok, load_test_examples(cfg, tok), cfg.data["sweep"]["k"], cfg.data["seed"])
    out = _reports(cfg)
    h = cfg.digest()
    with output_lock(out):
        write_csv(out / "sweep_k.csv", _stamp(rows, h, cid))
        line_chart_svg(out / "sweep_k.svg", [r["k_infer"] for r in rows], [r["accuracy"] for r in rows],
                       stamp=f"config_hash={h} checkpoint_id={cid}")
    for r in rows:
        log.info("sweep: K=%-3d accuracy %.4f", r["k_infer"], r["accuracy"])
    return rows


def cmd_sweep_lambda(cfg: RunConfig) -> list[dict]:
    rows = []
    base_ck = cfg.path("checkpoints")
    for lam in cfg.data["sweep"]["lambda"]:
        sub = copy.deepcopy(cfg.data)
        sub["train"]["lam"] = float(lam)
        sub["paths"]["checkpoints"] = str(base_ck / f"lambda-{float(lam):g}")
        scfg = RunConfig(sub, cfg.base_dir)
        cmd_train(scfg)
        model, tok, cid = load_trained(scfg)
        m, _ = evaluate(model, tok, load_test_examples(scfg, tok), scfg.data["k_infer"], PerturbSpec("none"),
                        scfg.data["seed"])
        rows.append({"lambda": float(lam), "k_infer": scfg.data["k_infer"], "accuracy": m["accuracy"],
                     "config_hash": scfg.digest(), "checkpoint_id": cid})
        log.info("sweep: lambda=%g accuracy %.4f", lam, m["accuracy"])
    out = _reports(cfg)
    with output_lock(out):
        write_csv(out / "sweep_lambda.csv", rows)
    return rows


def cmd_dump(cfg: RunConfig, n: int = 100) -> dict:
    model, tok, cid = load_trained(cfg)
    test = load_test_examples(cfg, tok)[:n]
    k = max(cfg.data["k_infer"], 1)
    M, labels, sids, dist = hidden_state_dump(model, tok, test, k, cfg.data["seed"])
    h = cfg.digest()
    rows = [{"label": lab, "sample_id": sid, **{f"h{j}": float(v) for j, v in enumerate(row)}}
            for lab, sid, row in zip(labels, sids, M)]
    out = _reports(cfg)
    with output_lock(out):
        write_csv(out / "hidden_states.csv", _stamp(rows, h, cid))
        _write_json(out / "centroid_distances.json", {**dist, "k_infer": k, "n_samples": len(test),
                                                      "config_hash": h, "checkpoint_id": cid})
    log.info("dump: latent-image %.3f latent-text %.3f image-text %.3f", dist["latent-image"],
             dist["latent-text"], dist["image-text"])
    return dist


# ---------------------------------------------------------------- argument parsing
def _ints(s: str):
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _floats(s: str):
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (defaults are used for absent keys)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. --set train.lam=0.3 (repeatable)")
    common.add_argument("-q", "--quiet", action="store_true")
    p = argparse.ArgumentParser(prog="latentcanvas", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="cmd", required=True)
    s = sub.add_parser("config", parents=[common], help="print the resolved config and its hash")
    s = sub.add_parser("gen", parents=[common], help="generate synthetic grid samples")
    s.add_argument("--n", type=int)
    s.add_argument("--seed", type=int)
    sub.add_parser("filter", parents=[common], help="lower/upper/aspect filtering and train/test split")
    s = sub.add_parser("render", parents=[common], help="render unified canvases for kept samples")
    s.add_argument("--strategy")
    s = sub.add_parser("targets", parents=[common], help="precompute pooled latent targets")
    s.add_argument("--stage", default="all", choices=sorted(STAGE_ALIASES))
    s.add_argument("--k", type=int, help="latent budget K_train")
    s = sub.add_parser("train", parents=[common], help="run the training curriculum")
    s.add_argument("--stages", type=int, choices=(1, 2))
    s.add_argument("--curriculum", choices=("two-stage", "stage1-only", "single-mixed"))
    s.add_argument("--stop-after", type=int, help=argparse.SUPPRESS)
    s = sub.add_parser("eval", parents=[common], help="exact-match accuracy on the test split")
    s.add_argument("--k", type=int, help="latent budget K_infer")
    s = sub.add_parser("perturb", parents=[common], help="causal perturbation probes")
    s.add_argument("--kind", help="comma-separated: zero,gaussian,repeat-first")
    s.add_argument("--k", type=int, help="latent budget K_infer")
    s = sub.add_parser("sweep", parents=[common], help="latent-budget or lambda sweep")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--k", type=_ints, help="comma-separated K_infer values")
    g.add_argument("--lambda", dest="lam", type=_floats, help="comma-separated lambda values (retrains)")
    s = sub.add_parser("dump", parents=[common], help="hidden-state dump and centroid distances")
    s.add_argument("--n", type=int, default=100, help="number of test samples")
    s.add_argument("--k", type=int, help="latent budget K_infer")
    return p


def resolve_config(args) -> RunConfig:
    ov = list(args.overrides)
    c = args.cmd
    if c == "gen":
        ov += [f"gen.n={args.n}"] if args.n is not None else []
        ov += [f"gen.seed={args.seed}"] if args.seed is not None else []
    if c == "render" and args.strategy:
        ov.append(f"render.strategy={json.dumps(args.strategy)}")
    if c == "targets" and args.k is not None:
        ov.append(f"k_train={args.k}")
    if c == "train":
        if args.stages == 1:
            ov.append('train.curriculum="stage1-only"')
        if args.curriculum:
            ov.append(f"train.curriculum={json.dumps(args.curriculum)}")
    if c in ("eval", "perturb", "dump") and args.k is not None:
        ov.append(f"k_infer={args.k}")
    if c == "perturb" and args.kind:
        ov.append(f"perturb={json.dumps([x.strip() for x in args.kind.split(',') if x.strip()])}")
    if c == "sweep":
        if args.k is not None:
            ov.append(f"sweep.k={json.dumps(args.k)}")
        if args.lam is not None:
            ov.append(f"sweep.lambda={json.dumps(args.lam)}")
    return RunConfig.load(args.config, ov)


def run(args) -> object:
    cfg = resolve_config(args)
    c = args.cmd
    if c == "config":
        print(cfg.to_json())
        print(f"hash {cfg.digest()}")
        return cfg
    if c == "gen":
        return cmd_gen(cfg)
    if c == "filter":
        return cmd_filter(cfg)
    if c == "render":
        return cmd_render(cfg)
    if c == "targets":
        return cmd_targets(cfg, args.stage)
    if c == "train":
        return cmd_train(cfg, args.stop_after)
    if c == "eval":
        return cmd_eval(cfg)
    if c == "perturb":
        return cmd_perturb(cfg)
    if c == "sweep":
        return cmd_sweep_lambda(cfg) if args.lam is not None else cmd_sweep_k(cfg)
    if c == "dump":
        return cmd_dump(cfg, args.n)
    raise ConfigError(f"unknown command {c}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        run(args)
    except (ConfigError, ModelConfigError, GridConfigError, RenderInputError, InferenceError, SampleError) as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except (MissingArtifact, LockError) as e:
        log.error("missing dependency: %s", e)
        return EXIT_MISSING
    except (NonFiniteLoss, Diverged, NonFiniteGradient, FloatingPointError) as e:
        log.error("numeric failure: %s", e)
        return EXIT_NUMERIC
    except Interrupted as e:
        log.error("%s; re-run the same command to resume", e)
        return 1
    except TrainingError as e:
        log.error("training error: %s", e)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
