import numpy as np
import pytest

from latentcanvas.inference import (InferenceError, PerturbSpec, apply_perturbation, evaluate, hidden_state_dump,
                                    infer, infer_batch, line_chart_svg, sweep_latent_budget, token_accounting,
                                    write_csv, write_jsonl)
from latentcanvas.training import CurriculumPlan, run_curriculum

from toy import example, model, tokenizer

D = 16


@pytest.fixture(scope="module")
def tok():
    return tokenizer()


@pytest.fixture(scope="module")
def exs(tok):
    rng = np.random.default_rng(0)
    return [example(tok, D, 3, rng, i, answer=["red", "blue", "green"][i % 3]) for i in range(6)]


@pytest.fixture(scope="module")
def m(tok):
    return model(tok)


# ------------------------------------------------------------- perturbations
def test_perturb_spec_validation():
    with pytest.raises(InferenceError):
        PerturbSpec("dropout")
    with pytest.raises(InferenceError):
        PerturbSpec("zero", noise_scale_mode="fixed")


def test_apply_perturbation_kinds():
    rng = np.random.default_rng(0)
    e = rng.normal(size=(2, D))
    hist = rng.normal(size=(2, 3, D))
    first = hist[:, 0]
    assert apply_perturbation(e, hist, PerturbSpec("none"), rng) is e
    assert np.linalg.norm(apply_perturbation(e, hist, PerturbSpec("zero"), rng)) == 0
    assert apply_perturbation(e, hist, PerturbSpec("repeat-first"), rng, first).tobytes() == first.tobytes()
    assert apply_perturbation(e, hist[:, :0], PerturbSpec("repeat-first"), rng, None) is e
    g1 = apply_perturbation(e, hist, PerturbSpec("gaussian"), np.random.default_rng(5))
    g2 = apply_perturbation(e, hist, PerturbSpec("gaussian"), np.random.default_rng(5))
    assert g1.tobytes() == g2.tobytes() and not np.array_equal(g1, e)


def test_gaussian_sigma_is_trace_std():
    e = np.full(D, 3.0)
    hist = np.stack([np.linspace(-1, 1, D)])
    sigma = np.concatenate([hist.ravel(), e]).std()
    out = apply_perturbation(e, hist, PerturbSpec("gaussian"), np.random.default_rng(1))
    eps = np.random.default_rng(1).standard_normal((1, D))[0]
    np.testing.assert_allclose(out, e + eps * sigma, rtol=1e-14)


# ------------------------------------------------------------- rollout
def test_trace_budget_and_counts(tok, m, exs):
    tr = infer(m, tok, exs[0], 3)
    assert tr.latents.shape == (3, D) and tr.raw_latents.shape == (3, D)
    assert tr.token_counts["latent_steps"] == 3 and tr.token_counts["control_tokens"] == 3
    assert tr.token_counts["answer_tokens"] == len(tr.answer_tokens)
    assert all(t not in tok.reserved_ids() for t in tr.answer_tokens)
    assert "<" not in tr.answer


def test_repeat_first_feeds_e1(tok, m, exs):
    tr = infer(m, tok, exs[0], 4, PerturbSpec("repeat-first"))
    for k in range(1, 4):
        assert tr.latents[k].tobytes() == tr.latents[0].tobytes()
    assert tr.latents[0].tobytes() == tr.raw_latents[0].tobytes()


def test_zero_feeds_zeros(tok, m, exs):
    tr = infer(m, tok, exs[0], 3, PerturbSpec("zero"))
    assert not np.any(tr.latents) and np.any(tr.raw_latents)


def test_budget_prefix_property(tok, m, exs):
    long = infer(m, tok, exs[1], 6)
    for k in (1, 2, 4):
        short = infer(m, tok, exs[1], k)
        assert short.latents.tobytes() == long.latents[:k].tobytes()


def test_greedy_is_seed_independent(tok, m, exs):
    a = infer_batch(m, tok, exs, 3, rng=np.random.default_rng(0))
    b = infer_batch(m, tok, exs, 3, rng=np.random.default_rng(123))
    assert [t.answer_tokens for t in a] == [t.answer_tokens for t in b]
    assert all(x.latents.tobytes() == y.latents.tobytes() for x, y in zip(a, b))


def test_batched_matches_single(tok, m, exs):
    batch = infer_batch(m, tok, exs, 2)
    for ex, tr in zip(exs, batch):
        one = infer(m, tok, ex, 2)
        np.testing.assert_allclose(one.latents, tr.latents, rtol=1e-10, atol=1e-13)
        assert one.answer_tokens == tr.answer_tokens


def test_k0_is_direct_answering(tok, m, exs):
    tr = infer(m, tok, exs[0], 0)
    assert tr.latents.shape == (0, D) and tr.token_counts["latent_steps"] == 0


def test_headroom_errors(tok, m, exs):
    with pytest.raises(InferenceError):
        infer(m, tok, exs[0], 40)
    with pytest.raises(InferenceError):
        infer(m, tok, exs[0], -1)


# ------------------------------------------------------------- evaluation
def test_evaluate_records(tok, m, exs):
    met, recs = evaluate(m, tok, exs, 2)
    assert met["n"] == len(exs) and 0 <= met["accuracy"] <= 1
    assert met["mean_latent_steps"] == 2
    for r in recs:
        assert set(r) == {"id", "answer", "correct", "latent_steps", "discrete_tokens", "perturb", "k_infer"}
        assert r["discrete_tokens"] == 3 + len(r["answer"].split())
    with pytest.raises(InferenceError):
        evaluate(m, tok, [], 2)


def test_trained_model_solves_trivial_set(tok):
    rng = np.random.default_rng(1)
    ex = example(tok, D, 2, rng, 0, answer="green")
    train = [ex] * 32
    mm = model(tok)
    plan = CurriculumPlan.stage1_only(k_train=2, batch_size=8, epochs=8, lr_backbone=1e-2, lr_head=1e-2)
    run_curriculum(plan, train, mm, tok)
    met, _ = evaluate(mm, tok, [ex], 2)
    assert met["accuracy"] == 1.0


def test_sweep_table(tok, m, exs):
    rows = sweep_latent_budget(m, tok, exs, [0])
    assert rows == [{"k_infer": 0, "accuracy": evaluate(m, tok, exs, 0)[0]["accuracy"],
                     "mean_discrete_tokens": evaluate(m, tok, exs, 0)[0]["mean_discrete_tokens"]}]
    assert sweep_latent_budget(m, tok, exs, [0, 2, 5]) == sweep_latent_budget(m, tok, exs, [0, 2, 5])


def test_token_accounting():
    t = token_accounting(10, 12, [190, 270])
    assert t["discrete_tokens"] == 13
    assert t["reduction"] == [190 / 13, 270 / 13]


def test_hidden_dump_partition(tok, m, exs):
    M, labels, sids, dist = hidden_state_dump(m, tok, exs[:2], 3)
    per = {"image": 4, "text": 5, "latent": 3}
    assert M.shape == (2 * sum(per.values()), D)
    for lab, n in per.items():
        assert labels.count(lab) == 2 * n
    assert set(dist) == {"latent-image", "latent-text", "image-text"}
    with pytest.raises(InferenceError):
        hidden_state_dump(m, tok, exs[:1], 0)


def test_hidden_dump_identical_inputs(tok, m, exs):
    M, labels, _, _ = hidden_state_dump(m, tok, [exs[0]] * 3, 2)
    lab = np.array(labels)
    for g in ("image", "text", "latent"):
        rows = M[lab == g].reshape(3, -1, D)
        assert np.all(rows == rows[0])


def test_reports(tmp_path):
    write_jsonl(tmp_path / "r.jsonl", [{"b": 1, "a": 2}])
    assert (tmp_path / "r.jsonl").read_text() == '{"a": 2, "b": 1}\n'
    write_csv(tmp_path / "t.csv", [{"k_infer": 0, "accuracy": 0.5}])
    assert (tmp_path / "t.csv").read_text().splitlines() == ["k_infer,accuracy", "0,0.5"]
    svg = line_chart_svg(tmp_path / "c.svg", [0, 4, 8], [0.2, 0.9, 1.3], stamp="x").read_text()
    assert svg.startswith("<svg") and "<!-- x -->" in svg and svg.count("<circle") == 3
