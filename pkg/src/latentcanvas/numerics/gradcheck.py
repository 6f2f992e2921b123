"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad


def numerical_grad(f: Callable[[], Tensor], param: Tensor, step: float = 1e-4,
                   indices: Sequence[tuple] | None = None) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. ``param`` at ``indices`` (all if None)."""
    if indices is None:
        indices = list(np.ndindex(param.shape))
    out = np.empty(len(indices))
    with no_grad():
        for n, idx in enumerate(indices):
            orig = param.data[idx]
            param.data[idx] = orig + step
            plus = float(f().data)
            param.data[idx] = orig - step
            minus = float(f().data)
            param.data[idx] = orig
            out[n] = (plus - minus) / (2.0 * step)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> float:
    """``||a - n|| / max(||a||, ||n||)``; 0 when both vanish."""
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    denom = max(np.linalg.norm(a), np.linalg.norm(n))
    if denom < floor:
        return 0.0
    return float(np.linalg.norm(a - n) / denom)


def check_gradients(f: Callable[[], Tensor], params: dict[str, Tensor], step: float = 1e-4,
                    max_entries: int | None = None, rng: np.random.Generator | None = None) -> dict[str, float]:
    """Relative error per parameter between backprop and central differences.

    ``max_entries`` limits each parameter to a random subset of coordinates.
    """
    for p in params.values():
        p.grad = None
    loss = f()
    loss.backward()
    rng = rng or np.random.default_rng(0)
    errors = {}
    for name, p in params.items():
        all_idx = list(np.ndindex(p.shape))
        if max_entries is not None and len(all_idx) > max_entries:
            pick = rng.choice(len(all_idx), size=max_entries, replace=False)
            idx = [all_idx[i] for i in sorted(pick)]
        else:
            idx = all_idx
        analytic = np.zeros(len(idx)) if p.grad is None else np.array([p.grad[i] for i in idx])
        numeric = numerical_grad(f, p, step, idx)
        errors[name] = relative_error(analytic, numeric)
    return errors
