from .decode import (ANSWER_CAP, PERTURB_KINDS, InferenceError, LatentTrace, PerturbSpec, apply_perturbation, infer,
                     infer_batch, max_answer_len)
from .evaluate import evaluate, hidden_state_dump, normalize, sweep_latent_budget, token_accounting
from .reports import line_chart_svg, write_csv, write_jsonl
