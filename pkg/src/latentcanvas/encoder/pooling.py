"""Pooling a feature map into a fixed budget of K latent targets."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

POOL_VARIANTS = ("avg2d", "avg1d", "mlerp2d")


@dataclass(frozen=True)
class PoolGrid:
    h_star: int
    w_star: int

    def __post_init__(self):
        if self.h_star < 1 or self.w_star < 1:
            raise ValueError(f"invalid pool grid {self.h_star}x{self.w_star}")

    @property
    def k(self) -> int:
        return self.h_star * self.w_star


@dataclass
class FeatureMap:
    values: np.ndarray  # [h_f, w_f, d]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"feature map must be [h_f, w_f, d] with h_f, w_f >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature map has non-finite values")
        self.values = v

    @property
    def h_f(self) -> int:
        return self.values.shape[0]

    @property
    def w_f(self) -> int:
        return self.values.shape[1]

    @property
    def d(self) -> int:
        return self.values.shape[2]


@dataclass
class LatentTargets:
    values: np.ndarray  # [K, d]
    source: str = "stage1-aux"

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _as_array(f) -> np.ndarray:
    return f.values if isinstance(f, FeatureMap) else np.asarray(f, dtype=np.float64)


def _distortion(h: int, w: int, h_f: int, w_f: int) -> Fraction:
    # |log(w/h) - log(w_f/h_f)| is monotone in max(r, 1/r) with r = (w h_f) / (h w_f)
    r = Fraction(w * h_f, h * w_f)
    return r if r >= 1 else 1 / r


def choose_pool_grid(h_f: int, w_f: int, k: int) -> PoolGrid:
    """Factor pair (h, w) of ``k`` closest in log aspect ratio to ``w_f / h_f``; smaller h wins ties.

    Compared in exact rational arithmetic so ties are real ties.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if h_f < 1 or w_f < 1:
        raise ValueError("feature map dims must be >= 1")
    best = None
    for h in range(1, k + 1):
        if k % h:
            continue
        dist = _distortion(h, k // h, h_f, w_f)
        if best is None or dist < best[0]:
            best = (dist, h)
    h = best[1]
    return PoolGrid(h, k // h)


def bin_bounds(n: int, k: int) -> list[tuple[int, int]]:
    """Adaptive bins: ``[floor(i n / k), ceil((i + 1) n / k))``."""
    return [((i * n) // k, -((-(i + 1) * n) // k)) for i in range(k)]


def _check_grid(grid: PoolGrid):
    if not isinstance(grid, PoolGrid):
        grid = PoolGrid(*grid)
    return grid


def pool_avg_2d(f, grid: PoolGrid, source: str = "stage1-aux") -> LatentTargets:
    grid = _check_grid(grid)
    x = _as_array(f)
    h_f, w_f, d = x.shape
    out = np.empty((grid.h_star, grid.w_star, d))
    for i, (r0, r1) in enumerate(bin_bounds(h_f, grid.h_star)):
        for j, (c0, c1) in enumerate(bin_bounds(w_f, grid.w_star)):
            out[i, j] = x[r0:r1, c0:c1].mean(axis=(0, 1))
    return LatentTargets(out.reshape(grid.k, d), source)


def pool_avg_1d(f, k: int, source: str = "stage1-aux") -> LatentTargets:
    if k < 1:
        raise ValueError("k must be >= 1")
    x = _as_array(f)
    flat = x.reshape(-1, x.shape[-1])
    if k == flat.shape[0]:
        return LatentTargets(flat.copy(), source)
    out = np.stack([flat[a:b].mean(axis=0) for a, b in bin_bounds(flat.shape[0], k)])
    return LatentTargets(out, source)


def mlerp_merge(members: np.ndarray) -> np.ndarray:
    """Direction from the mean of unit vectors, magnitude from the mean norm."""
    norms = np.linalg.norm(members, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    units = members / safe[:, None]
    units[norms == 0] = 0.0
    direction = units.mean(axis=0)
    dn = np.linalg.norm(direction)
    if dn == 0:
        return np.zeros(members.shape[1])
    return direction / dn * norms.mean()


def pool_mlerp_2d(f, grid: PoolGrid, source: str = "stage1-aux") -> LatentTargets:
    grid = _check_grid(grid)
    x = _as_array(f)
    d = x.shape[2]
    rows = []
    for r0, r1 in bin_bounds(x.shape[0], grid.h_star):
        for c0, c1 in bin_bounds(x.shape[1], grid.w_star):
            members = x[r0:r1, c0:c1].reshape(-1, d)
            rows.append(members[0].copy() if len(members) == 1 else mlerp_merge(members))
    return LatentTargets(np.stack(rows), source)


def pool_targets(f, k: int, variant: str = "avg2d", source: str = "stage1-aux") -> LatentTargets:
    """Reduce a feature map to exactly ``k`` target rows with the chosen variant."""
    x = _as_array(f)
    if variant == "avg2d":
        return pool_avg_2d(x, choose_pool_grid(x.shape[0], x.shape[1], k), source)
    if variant == "mlerp2d":
        return pool_mlerp_2d(x, choose_pool_grid(x.shape[0], x.shape[1], k), source)
    if variant == "avg1d":
        return pool_avg_1d(x, k, source)
    raise ValueError(f"unknown pooling variant {variant!r}; expected one of {POOL_VARIANTS}")
