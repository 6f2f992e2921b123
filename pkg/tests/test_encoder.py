import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentcanvas.canvas import AuxiliaryImage
from latentcanvas.encoder import (EncoderConfig, FeatureMap, PoolGrid, TargetCache, TargetCacheError,
                                  ToyVisionEncoder, bin_bounds, choose_pool_grid, pool_avg_1d, pool_avg_2d,
                                  pool_mlerp_2d, pool_targets)


def brute_grid(h_f, w_f, k):
    """Float argmin over factor pairs; near-equal scores count as ties and go to smaller h."""
    target = math.log(w_f / h_f)
    best = None
    for h in range(1, k + 1):
        if k % h == 0:
            s = abs(math.log((k // h) / h) - target)
            if best is None or s < best[0] - 1e-12:
                best = (s, h)
    return best[1], k // best[1]


def test_grid_examples():
    assert choose_pool_grid(12, 18, 24) == PoolGrid(4, 6)
    assert choose_pool_grid(7, 7, 16) == PoolGrid(4, 4)
    assert choose_pool_grid(10, 30, 12) == PoolGrid(2, 6)


def test_grid_ties_pick_smaller_h():
    # K=2 on a square map: (1,2) and (2,1) distort equally
    assert choose_pool_grid(5, 5, 2) == PoolGrid(1, 2)


def test_grid_oracle_exhaustive_small():
    for k in range(1, 25):
        for h_f in range(1, 20):
            for w_f in range(1, 20):
                g = choose_pool_grid(h_f, w_f, k)
                assert (g.h_star, g.w_star) == brute_grid(h_f, w_f, k), (h_f, w_f, k)


def test_grid_rejects_bad_k():
    with pytest.raises(ValueError):
        choose_pool_grid(3, 3, 0)


def test_bin_bounds_floor_ceil():
    assert bin_bounds(10, 4) == [(0, 3), (2, 5), (5, 8), (7, 10)]
    assert [b - a for a, b in bin_bounds(10, 4)] == [3, 3, 3, 3]


def test_pool_identity_and_constant():
    rng = np.random.default_rng(0)
    f = rng.standard_normal((3, 5, 4))
    out = pool_avg_2d(FeatureMap(f), PoolGrid(3, 5)).values
    assert out.tobytes() == f.reshape(15, 4).tobytes()
    const = np.full((7, 9, 3), 2.5)
    assert np.all(pool_avg_2d(const, choose_pool_grid(7, 9, 6)).values == 2.5)


def test_pool_quadrants():
    f = np.arange(16 * 2, dtype=float).reshape(4, 4, 2)
    out = pool_avg_2d(f, PoolGrid(2, 2)).values
    expect = [f[0:2, 0:2].mean((0, 1)), f[0:2, 2:4].mean((0, 1)), f[2:4, 0:2].mean((0, 1)), f[2:4, 2:4].mean((0, 1))]
    np.testing.assert_array_equal(out, np.stack(expect))


def test_pool_1d():
    f = np.arange(12.0).reshape(2, 6, 1)
    np.testing.assert_array_equal(pool_avg_1d(f, 4).values[:, 0], [1, 4, 7, 10])
    assert pool_avg_1d(f, 12).values.tobytes() == f.reshape(12, 1).tobytes()
    # length 10 into 4 bins: [0,3) [2,5) [5,8) [7,10)
    g = np.arange(10.0).reshape(1, 10, 1)
    np.testing.assert_array_equal(pool_avg_1d(g, 4).values[:, 0], [1, 3, 6, 8])


def test_mlerp():
    f = np.random.default_rng(2).standard_normal((2, 3, 4))
    np.testing.assert_array_equal(pool_mlerp_2d(f, PoolGrid(2, 3)).values, f.reshape(6, 4))
    v = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(pool_mlerp_2d(np.stack([v, v])[None], PoolGrid(1, 1)).values[0], v, atol=1e-15)
    e = np.zeros((1, 2, 3))
    e[0, 0, 0] = 2
    e[0, 1, 1] = 2
    np.testing.assert_allclose(pool_mlerp_2d(e, PoolGrid(1, 1)).values[0], [math.sqrt(2), math.sqrt(2), 0], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(h=st.integers(1, 12), w=st.integers(1, 12), k=st.integers(1, 20), seed=st.integers(0, 10**6),
       variant=st.sampled_from(["avg2d", "avg1d", "mlerp2d"]))
def test_budget_and_bounds(h, w, k, seed, variant):
    f = np.random.default_rng(seed).standard_normal((h, w, 3))
    out = pool_targets(f, k, variant).values
    assert out.shape == (k, 3)
    if variant != "mlerp2d":
        lo, hi = f.reshape(-1, 3).min(0), f.reshape(-1, 3).max(0)
        assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)


def test_unknown_variant():
    with pytest.raises(ValueError):
        pool_targets(np.zeros((2, 2, 1)), 2, "max")


# ------------------------------------------------------------------ encoder
def test_encoder_shape_and_determinism():
    enc = ToyVisionEncoder(EncoderConfig(d=32))
    img = AuxiliaryImage(np.random.default_rng(0).integers(0, 256, (448, 448, 3), dtype=np.uint8))
    f = enc.encode(img)
    assert f.values.shape == (28, 28, 32)
    assert ToyVisionEncoder(EncoderConfig(d=32)).encode(img).values.tobytes() == f.values.tobytes()


def test_encoder_resize_and_padding():
    enc = ToyVisionEncoder(EncoderConfig(d=16))
    assert enc.encode(np.zeros((1000, 500, 3), np.uint8)).values.shape[:2] == (28, 14)
    assert enc.encode(np.zeros((20, 33, 3), np.uint8)).values.shape[:2] == (2, 3)


def test_encoder_black_white_distinct():
    enc = ToyVisionEncoder()
    black = enc.encode(np.zeros((32, 32, 3), np.uint8)).values
    white = enc.encode(np.full((32, 32, 3), 255, np.uint8)).values
    assert np.all(white == 0) and np.linalg.norm(black) > 1


def test_projection_orthonormal():
    enc = ToyVisionEncoder()
    np.testing.assert_allclose(enc.projection.T @ enc.projection, np.eye(enc.d), atol=1e-12)
    with pytest.raises(ValueError):
        enc.projection[0, 0] = 1.0


# -------------------------------------------------------------------- cache
def test_cache_roundtrip_and_last_write_wins(tmp_path):
    c = TargetCache(tmp_path, "train")
    a = np.arange(12.0).reshape(3, 4)
    c.put("s1", "stage1-aux", 7, a)
    c.put("s1", "stage1-aux", 7, a * 2)
    c.put("s2", "stage2-canvas", 7, a + 1)
    again = TargetCache(tmp_path, "train")
    np.testing.assert_array_equal(again.get("s1", "stage1-aux", 3, 7), a * 2)
    np.testing.assert_array_equal(again.get("s2", "stage2-canvas", 3, 7), a + 1)
    assert len(again) == 2
    with pytest.raises(KeyError):
        again.get("s1", "stage1-aux", 3, 8)
    raw = (tmp_path / "train.targets.bin").read_bytes()
    assert np.frombuffer(raw[:8], "<f8")[0] == 0.0


def test_cache_truncated_data_detected(tmp_path):
    c = TargetCache(tmp_path, "x")
    c.put("s", "stage1-aux", 1, np.ones((2, 2)))
    with open(tmp_path / "x.targets.bin", "r+b") as fh:
        fh.truncate(8)
    with pytest.raises(TargetCacheError):
        TargetCache(tmp_path, "x")
