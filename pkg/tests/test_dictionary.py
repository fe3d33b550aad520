import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avibench.features.dictionary import (DictionaryConfig, encode_layers, encode_pool, extract_patches,
                                          learn_dictionary, spherical_kmeans, unit_rows)
from avibench.features.spectral import LOG_MEL, FeatureError, FeatureFrames


def _melspecs(seed, n=6, frames=40, bands=8):
    r = np.random.default_rng(seed)
    return [FeatureFrames(r.normal(size=(frames, bands)), LOG_MEL) for _ in range(n)]


SMALL = DictionaryConfig(patch_width=2, k1=6, k2=4, max_iter=30, seed=1)


def test_orthogonal_patches_fixed_point():
    k = 7
    x = np.eye(k)
    res = spherical_kmeans(x, k, 20, np.random.default_rng(3))
    order = np.argmax(res.centroids, axis=1)
    assert sorted(order) == list(range(k))
    assert np.allclose(res.centroids, x[order])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_objective_non_decreasing(seed):
    r = np.random.default_rng(seed)
    x, _ = unit_rows(r.normal(size=(60, 5)))
    obj = spherical_kmeans(x, 6, 30, r).objective
    assert all(b >= a - 1e-12 for a, b in zip(obj, obj[1:]))


def test_kmeans_errors():
    with pytest.raises(FeatureError):
        spherical_kmeans(np.eye(3), 0)
    with pytest.raises(FeatureError, match="insufficient"):
        spherical_kmeans(np.eye(3), 5)


def test_learned_dictionary_invariants():
    d = learn_dictionary(_melspecs(0), SMALL)
    assert np.allclose(np.linalg.norm(d.layer1_centroids, axis=1), 1, atol=1e-9)
    assert np.allclose(np.linalg.norm(d.layer2_centroids, axis=1), 1, atol=1e-9)
    assert d.whiten_matrix.shape[0] == d.whiten_matrix.shape[1] == d.patch_dim
    assert np.linalg.matrix_rank(d.whiten_matrix) == d.patch_dim
    for obj in (d.layer1_objective, d.layer2_objective):
        assert all(b >= a - 1e-12 for a, b in zip(obj, obj[1:]))


def test_whitened_covariance_identity():
    specs = _melspecs(2)
    d = learn_dictionary(specs, SMALL)
    p = np.concatenate([extract_patches(m, SMALL.patch_width) for m in specs])
    z = (p - d.whiten_mean) @ d.whiten_matrix
    cov = z.T @ z / z.shape[0]
    off = cov - np.diag(np.diag(cov))
    assert np.max(np.abs(off)) < 1e-6
    assert np.allclose(np.diag(cov), 1, atol=1e-6)


def test_insufficient_patches():
    with pytest.raises(FeatureError, match="insufficient"):
        learn_dictionary([FeatureFrames(np.random.default_rng(0).normal(size=(3, 8)), LOG_MEL)],
                         DictionaryConfig(patch_width=2, k1=50, k2=4))
    with pytest.raises(FeatureError):
        learn_dictionary(_melspecs(0), DictionaryConfig(k1=0))


def test_patches_equal_to_centroid_respond_maximally():
    cfg = DictionaryConfig(patch_width=1, k1=5, k2=3, max_iter=30, seed=4)
    d = learn_dictionary(_melspecs(5), cfg)
    j = 2
    frame = d.whiten_mean + d.layer1_centroids[j] @ np.linalg.inv(d.whiten_matrix)
    mel = FeatureFrames(np.tile(frame, (10, 1)), LOG_MEL)
    l1, _ = encode_layers(mel, d)
    assert np.all(l1.vectors.argmax(axis=1) == j)
    pooled = encode_pool(mel, d)
    assert pooled[:cfg.k1].argmax() == j and pooled[j] == pytest.approx(1.0)


def test_zero_clip_zero_vector():
    d = learn_dictionary(_melspecs(6), SMALL)
    v = encode_pool(FeatureFrames(np.zeros((20, 8)), LOG_MEL), d)
    assert v.shape == (2 * SMALL.k1 + 2 * SMALL.k2,) and not v.any()


def test_frame_shuffle_keeps_layer1_max_pool():
    cfg = DictionaryConfig(patch_width=1, k1=6, k2=4, max_iter=30, seed=7)
    d = learn_dictionary(_melspecs(8), cfg)
    mel = _melspecs(9, n=1)[0]
    perm = np.random.default_rng(0).permutation(len(mel))
    a = encode_pool(mel, d)
    b = encode_pool(FeatureFrames(mel.vectors[perm], LOG_MEL), d)
    assert np.allclose(a[:cfg.k1], b[:cfg.k1])
    assert np.allclose(a[cfg.k1:2 * cfg.k1], b[cfg.k1:2 * cfg.k1])


def test_encode_dimension_mismatch():
    d = learn_dictionary(_melspecs(0), SMALL)
    with pytest.raises(FeatureError):
        encode_pool(FeatureFrames(np.zeros((20, 5)), LOG_MEL), d)
