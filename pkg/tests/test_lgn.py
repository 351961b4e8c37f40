import numpy as np
import pytest

from langground.nn.model import (
    ArchConfig,
    BatchPoint,
    CheckpointError,
    LgnModel,
    batch_gradients,
    build_pyramid,
    encode_relation,
    load_model,
    nll,
    one_hot_relation,
    predict,
    roi_pool,
    save_model,
)
from langground.parser import RELATIONS

TINY = ArchConfig(feat=2, map_embed=4, rel_embed=3, head_hidden=3)


def rand_raster(rng, h=16, w=16, c=5):
    return rng.normal(0, 0.5, size=(h, w, c))


def test_pyramid_level_sizes():
    model = LgnModel.create(ArchConfig(), seed=0)
    x = np.zeros((64, 64, 5))
    cache = build_pyramid(model, x)
    assert [p.shape[:2] for p in cache.P] == [(64, 64), (32, 32), (16, 16), (8, 8)]
    assert all(p.shape[2] == 16 for p in cache.P)


def test_zero_input_zero_bias_gives_zero_pyramid():
    model = LgnModel.zeros()
    cache = build_pyramid(model, np.zeros((32, 32, 5)))
    for p in cache.P:
        assert np.allclose(p, 0.0)


def test_single_level_variant():
    arch = ArchConfig(pyramid=False)
    model = LgnModel.create(arch, seed=1)
    cache = build_pyramid(model, np.zeros((64, 64, 5)))
    assert len(cache.P) == 1
    assert cache.P[0].shape[:2] == (8, 8)
    pooled, _ = roi_pool(cache, (10, 10), arch.roi_k)
    assert pooled.shape == (arch.feat,)


def test_bad_dims_rejected():
    model = LgnModel.create(seed=0)
    with pytest.raises(ValueError):
        build_pyramid(model, np.zeros((30, 30, 5)))
    with pytest.raises(ValueError):
        build_pyramid(model, np.zeros((32, 32, 3)))


def test_roi_pool_constant_pyramid():
    model = LgnModel.create(TINY, seed=2)
    cache = build_pyramid(model, np.zeros((64, 64, 5)))
    for i, p in enumerate(cache.P):
        cache.P[i] = np.full_like(p, 3.0)
    # query far enough from borders that the window fits at every level
    pooled, _ = roi_pool(cache, (32, 32), 5)
    assert np.allclose(pooled, 3.0)


def test_roi_pool_corner_matches_padding_oracle():
    model = LgnModel.create(TINY, seed=3)
    rng = np.random.default_rng(0)
    cache = build_pyramid(model, rand_raster(rng))
    k = 5
    pooled, _ = roi_pool(cache, (0, 0), k)
    f = cache.P[0].shape[2]
    for lvl, p in enumerate(cache.P):
        padded = np.pad(p, ((k // 2, k // 2), (k // 2, k // 2), (0, 0)))
        cell = (0 >> lvl, 0 >> lvl)
        window = padded[cell[0] : cell[0] + k, cell[1] : cell[1] + k]
        oracle = window.mean(axis=(0, 1))
        assert np.allclose(pooled[lvl * f : (lvl + 1) * f], oracle)


def test_roi_pool_sparse_separation():
    model = LgnModel.create(TINY, seed=4)
    cache = build_pyramid(model, np.zeros((64, 64, 5)))
    for i, p in enumerate(cache.P):
        cache.P[i] = np.zeros_like(p)
    cache.P[-1][0, 0, :] = 1.0  # one nonzero cell at the coarsest level
    k = 5
    f = cache.P[0].shape[2]
    pa, _ = roi_pool(cache, (0, 0), k)
    pb, _ = roi_pool(cache, (63, 63), k)  # >= k * 2^3 cells away
    a_coarse = pa[3 * f :]
    b_coarse = pb[3 * f :]
    assert (np.count_nonzero(a_coarse) == 0) or (np.count_nonzero(b_coarse) == 0)
    assert np.count_nonzero(a_coarse) > 0


def test_one_hot_hamming():
    for a in RELATIONS:
        for b in RELATIONS:
            d = int(np.abs(one_hot_relation(a) - one_hot_relation(b)).sum())
            assert d == (0 if a == b else 2)


def test_relation_embedding_zero_weights():
    model = LgnModel.zeros(TINY)
    assert np.allclose(encode_relation(model, "near"), 0.0)


def test_relation_embedding_unknown():
    model = LgnModel.create(TINY, seed=0)
    with pytest.raises(KeyError):
        encode_relation(model, "betwixt")


def test_zero_model_predicts_half():
    model = LgnModel.zeros(TINY)
    p = predict(model, np.zeros((16, 16, 5)), (4, 4), "near")
    assert p == 0.5


def test_predictions_in_open_interval():
    rng = np.random.default_rng(5)
    model = LgnModel.create(TINY, seed=6)
    x = rand_raster(rng)
    cache = build_pyramid(model, x)
    for _ in range(100):
        cell = (int(rng.integers(16)), int(rng.integers(16)))
        rel = str(rng.choice(RELATIONS))
        p = predict(model, x, cell, rel, cache=cache)
        assert 0.0 < p < 1.0


def test_shared_pyramid_pass_between_relations():
    rng = np.random.default_rng(6)
    model = LgnModel.create(TINY, seed=7)
    x = rand_raster(rng)
    cache = build_pyramid(model, x)
    p1 = predict(model, x, (4, 4), "near", cache=cache)
    p2 = predict(model, x, (4, 4), "behind", cache=cache)
    assert p1 != p2
    assert p1 == predict(model, x, (4, 4), "near")


def test_nll_values():
    assert nll(0.5, 1) == pytest.approx(np.log(2))
    assert nll(1.0 - 1e-16, 1) == pytest.approx(0.0, abs=1e-12)
    assert nll(1e-300, 0) == pytest.approx(0.0, abs=1e-12)


def test_nll_cross_entropy_decomposition():
    # mean NLL = KL(p*||p-hat) + H(p*) on a Bernoulli(0.3) population
    p_true, p_hat = 0.3, 0.45
    mean_nll = p_true * nll(p_hat, 1) + (1 - p_true) * nll(p_hat, 0)
    h = -(p_true * np.log(p_true) + (1 - p_true) * np.log(1 - p_true))
    kl = p_true * np.log(p_true / p_hat) + (1 - p_true) * np.log(
        (1 - p_true) / (1 - p_hat)
    )
    assert mean_nll == pytest.approx(kl + h, abs=1e-12)


def _fd_check(model, points, rasters, h=1e-4, rtol=1e-3):
    grads, _ = batch_gradients(model, points, rasters)

    def loss():
        from langground.nn.train import dataset_nll

        return dataset_nll(model, points, rasters)

    worst = 0.0
    for name, w in model.weights.items():
        flat = w.ravel()
        g = grads[name].ravel()
        idx = np.linspace(0, flat.size - 1, min(flat.size, 6)).astype(int)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            lp = loss()
            flat[i] = orig - h
            lm = loss()
            flat[i] = orig
            fd = (lp - lm) / (2 * h)
            rel = abs(g[i] - fd) / (abs(g[i]) + 1e-8)
            worst = max(worst, rel if abs(fd) > 1e-10 or abs(g[i]) > 1e-10 else 0.0)
            assert rel < rtol or (abs(fd) < 1e-10 and abs(g[i]) < 1e-10), (
                name,
                i,
                g[i],
                fd,
            )
    return worst


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(11)
    model = LgnModel.create(TINY, seed=12)
    rasters = {"m": rand_raster(rng)}
    points = [
        BatchPoint("m", (int(rng.integers(16)), int(rng.integers(16))), r, int(rng.integers(2)))
        for r in ("near", "behind", "at", "around")
    ]
    _fd_check(model, points, rasters)


def test_gradients_single_level_variant():
    rng = np.random.default_rng(13)
    model = LgnModel.create(ArchConfig(feat=2, map_embed=4, rel_embed=3, head_hidden=3, pyramid=False), seed=14)
    rasters = {"m": rand_raster(rng)}
    points = [BatchPoint("m", (5, 9), "near", 1), BatchPoint("m", (2, 2), "far_from", 0)]
    _fd_check(model, points, rasters)


def test_duplicated_batch_same_gradient():
    rng = np.random.default_rng(15)
    model = LgnModel.create(TINY, seed=16)
    rasters = {"m": rand_raster(rng)}
    pts = [BatchPoint("m", (3, 3), "near", 1), BatchPoint("m", (9, 12), "by", 0)]
    g1, l1 = batch_gradients(model, pts, rasters)
    g2, l2 = batch_gradients(model, pts + pts, rasters)
    assert l1 == pytest.approx(l2)
    for k in g1:
        assert np.allclose(g1[k], g2[k], atol=1e-12)


def test_empty_batch_rejected():
    model = LgnModel.create(TINY, seed=0)
    with pytest.raises(ValueError):
        batch_gradients(model, [], {})


def test_checkpoint_roundtrip_bit_exact():
    rng = np.random.default_rng(17)
    model = LgnModel.create(TINY, seed=18)
    x = rand_raster(rng)
    again = load_model(save_model(model))
    for cell in [(0, 0), (7, 9)]:
        assert predict(model, x, cell, "near") == predict(again, x, cell, "near")


def test_checkpoint_truncated():
    model = LgnModel.create(TINY, seed=19)
    text = save_model(model)
    with pytest.raises(CheckpointError):
        load_model(text[: len(text) // 2])


def test_checkpoint_arch_mismatch():
    single = LgnModel.create(ArchConfig(pyramid=False), seed=20)
    doc = save_model(single)
    import json

    d = json.loads(doc)
    d["arch"]["pyramid"] = True  # claim pyramid but ship single-level weights
    with pytest.raises(CheckpointError):
        load_model(json.dumps(d))


def test_checkpoint_bad_version():
    with pytest.raises(CheckpointError):
        load_model('{"version": 9}')
