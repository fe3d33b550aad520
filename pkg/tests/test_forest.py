import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avibench.detectors.forest import ForestError, RandomForest, grow_tree, rf_fit, rf_score


def _blobs(seed, n=200):
    r = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    x = r.normal(size=(n, 2)) * 0.5 + np.where(y[:, None] == 1, 3.0, -3.0)
    return x, y


def test_separable_blobs_training_accuracy():
    x, y = _blobs(0)
    f = rf_fit(x, y, n_trees=25, seed=1)
    assert np.mean((rf_score(f, x) > 0.5) == y) >= 0.99


def test_pure_leaves_on_pure_subset():
    x, y = _blobs(1)
    f = rf_fit(x, y, n_trees=1, seed=2, bootstrap=False)
    assert np.all(f.trees[0].predict(x[y == 1]) == 1.0)
    assert np.all(f.trees[0].predict(x[y == 0]) == 0.0)


def test_thread_count_does_not_change_forest():
    r = np.random.default_rng(5)
    x = r.normal(size=(150, 6))
    y = (x[:, 0] + 0.5 * r.normal(size=150) > 0).astype(int)
    a = rf_fit(x, y, n_trees=20, seed=9, n_threads=1)
    b = rf_fit(x, y, n_trees=20, seed=9, n_threads=4)
    for ta, tb in zip(a.trees, b.trees):
        for field in ("feature", "threshold", "left", "right", "value"):
            assert getattr(ta, field).tobytes() == getattr(tb, field).tobytes()


def test_single_tree_score_is_leaf_fraction():
    r = np.random.default_rng(3)
    x = r.normal(size=(80, 3))
    y = r.integers(0, 2, 80)
    f = rf_fit(x, y, n_trees=1, max_depth=2, seed=0)
    t = f.trees[0]
    q = r.normal(size=(10, 3))
    assert np.array_equal(rf_score(f, q), t.value[t.apply(q)])


def test_all_trees_agree_gives_exact_extremes():
    x, y = _blobs(4)
    f = rf_fit(x, y, n_trees=15, seed=0)
    s = rf_score(f, np.array([[10.0, 10.0], [-10.0, -10.0]]))
    assert s[0] == 1.0 and s[1] == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_scores_in_unit_interval(seed):
    r = np.random.default_rng(seed)
    x = r.normal(size=(40, 4))
    y = np.r_[np.zeros(20), np.ones(20)]
    f = rf_fit(x, y, n_trees=5, seed=seed)
    s = rf_score(f, r.normal(0, 100, size=(30, 4)))
    assert np.all((0 <= s) & (s <= 1))
    for t in f.trees:
        assert np.all((0 <= t.value) & (t.value <= 1))


def test_errors():
    with pytest.raises(ForestError, match="single-class"):
        rf_fit(np.zeros((5, 2)), np.ones(5))
    f = rf_fit(*_blobs(0), n_trees=2)
    with pytest.raises(ForestError):
        rf_score(f, np.zeros((1, 3)))
