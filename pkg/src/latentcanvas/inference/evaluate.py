"""Accuracy evaluation, latent-budget sweeps, hidden-state dumps and token accounting."""

from __future__ import annotations

import itertools

import numpy as np

from ..model.transformer import Stream, ToyLM
from ..numerics.tensor import no_grad
from ..training.sequence import prompt_entries
from .decode import InferenceError, PerturbSpec, infer_batch


def normalize(a: str) -> str:
    return " ".join(a.strip().lower().split())


def evaluate(model: ToyLM, tok, examples, k_infer: int, perturb: PerturbSpec | None = None, seed: int = 0,
             batch_size: int = 512):
    """Exact-match accuracy plus per-sample records; prompts are grouped by length."""
    if not examples:
        raise InferenceError("empty test set")
    perturb = perturb or PerturbSpec()
    rng = np.random.default_rng(seed)
    order = sorted(range(len(examples)), key=lambda j: (len(prompt_entries(examples[j], tok)), j))
    results = {}
    for _, grp in itertools.groupby(order, key=lambda j: len(prompt_entries(examples[j], tok))):
        grp = list(grp)
        for s in range(0, len(grp), batch_size):
            chunk = [examples[j] for j in grp[s:s + batch_size]]
            for ex, tr in zip(chunk, infer_batch(model, tok, chunk, k_infer, perturb, rng)):
                results[ex.id] = (ex, tr)
    records = []
    for ex in examples:
        _, tr = results[ex.id]
        correct = normalize(tr.answer) == normalize(ex.answer)
        discrete = tr.token_counts["control_tokens"] + tr.token_counts["answer_tokens"]
        records.append({"id": ex.id, "answer": tr.answer, "correct": bool(correct),
                        "latent_steps": tr.token_counts["latent_steps"], "discrete_tokens": discrete,
                        "perturb": perturb.kind, "k_infer": k_infer})
    n = len(records)
    metrics = {"n": n, "k_infer": k_infer, "perturb": perturb.kind,
               "accuracy": sum(r["correct"] for r in records) / n,
               "mean_discrete_tokens": sum(r["discrete_tokens"] for r in records) / n,
               "mean_latent_steps": sum(r["latent_steps"] for r in records) / n}
    return metrics, records


def sweep_latent_budget(model: ToyLM, tok, examples, budgets, seed: int = 0) -> list[dict]:
    rows = []
    for k in budgets:
        m, _ = evaluate(model, tok, examples, int(k), PerturbSpec("none"), seed)
        rows.append({"k_infer": int(k), "accuracy": m["accuracy"], "mean_discrete_tokens": m["mean_discrete_tokens"]})
    return rows


def token_accounting(answer_len: int, k_infer: int, cot_tokens) -> dict:
    """Discrete tokens generated by latent inference vs a text chain-of-thought of ``cot_tokens``."""
    discrete = 3 + answer_len
    cot = np.atleast_1d(np.asarray(cot_tokens, dtype=np.float64))
    return {"k_infer": k_infer, "discrete_tokens": discrete, "latent_steps": k_infer,
            "reduction": (cot / discrete).tolist()}


def hidden_state_dump(model: ToyLM, tok, examples, k_infer: int, seed: int = 0):
    """Final-layer states at question-text, problem-image and latent positions.

    Returns ``(matrix [N, d], labels, sample_ids, centroid_distances)``.
    """
    if k_infer < 1:
        raise InferenceError("hidden-state dump needs at least one latent step")
    c = tok.controls
    mats, labels, sids = [], [], []
    traces = {}
    order = sorted(range(len(examples)), key=lambda j: len(prompt_entries(examples[j], tok)))
    for _, grp in itertools.groupby(order, key=lambda j: len(prompt_entries(examples[j], tok))):
        chunk = [examples[j] for j in grp]
        for ex, tr in zip(chunk, infer_batch(model, tok, chunk, k_infer, PerturbSpec("none"),
                                             np.random.default_rng(seed), answer_cap=1)):
            traces[ex.id] = tr
    d = model.cfg.d_model
    with no_grad():
        for ex in examples:
            pe = prompt_entries(ex, tok)
            n_img = ex.image_feats.shape[0]
            ids = pe + [c.start] + [-1] * k_infer + [c.end, c.latent_end]
            cont = np.zeros((len(ids), d))
            cont[1:1 + n_img] = ex.image_feats
            p = len(pe)
            cont[p + 1:p + 1 + k_infer] = traces[ex.id].latents
            _, hidden = model(Stream(np.array([ids]), cont[None]))
            h = hidden[-1].data[0]
            groups = {"image": range(1, 1 + n_img), "text": range(1 + n_img, p),
                      "latent": range(p + 1, p + 1 + k_infer)}
            for lab, pos in groups.items():
                for t in pos:
                    mats.append(h[t])
                    labels.append(lab)
                    sids.append(ex.id)
    M = np.stack(mats)
    lab = np.array(labels)
    cents = {g: M[lab == g].mean(axis=0) for g in ("text", "image", "latent")}
    dist = {f"{a}-{b}": float(np.linalg.norm(cents[a] - cents[b]))
            for a, b in (("latent", "image"), ("latent", "text"), ("image", "text"))}
    return M, labels, sids, dist
