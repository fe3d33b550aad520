import numpy as np
import pytest
from scipy.optimize import minimize

from avibench.eval.calibration import (calibration_scores, calibration_table, platt_apply, platt_fit,
                                       platt_fit_scores, platt_transform)
from avibench.eval.metrics import EvalError, SubmissionSet, auc_scores


def test_three_out_of_four():
    t = calibration_scores([0.75] * 4, [1, 1, 1, 0])
    b = [x for x in t.bins if x.count][0]
    assert b.empirical_rate == 0.75 and b.mean_predicted == 0.75


def test_bins_partition_and_empty_bins():
    t = calibration_scores([0.0, 0.05, 1.0, 0.5], [0, 0, 1, 1])
    assert t.n == 4 and len(t.bins) == 10
    assert t.bins[0].lo == 0.0 and t.bins[-1].hi == 1.0
    assert all(a.hi == pytest.approx(b.lo) for a, b in zip(t.bins, t.bins[1:]))
    assert t.bins[-1].count == 1  # score 1.0 lands in the last bin
    empty = t.bins[3]
    assert empty.count == 0 and empty.empirical_rate is None and empty.mean_predicted is None


def test_bernoulli_scores_within_three_sigma():
    r = np.random.default_rng(0)
    p = r.uniform(size=100_000)
    y = (r.uniform(size=p.size) < p).astype(int)
    for b in calibration_scores(p, y).bins:
        sigma = np.sqrt(b.mean_predicted * (1 - b.mean_predicted) / b.count)
        assert abs(b.empirical_rate - b.mean_predicted) < 3 * sigma


def _smoothed_nll(a, b, f, y):
    n_pos, n_neg = (y == 1).sum(), (y == 0).sum()
    t = np.where(y == 1, (n_pos + 1) / (n_pos + 2), 1 / (n_neg + 2))
    z = a * f + b
    return np.sum(np.logaddexp(0, z) - (1 - t) * z)


def test_platt_matches_generic_optimizer():
    r = np.random.default_rng(1)
    f = r.uniform(size=2000)
    y = (r.uniform(size=f.size) < f ** 2).astype(int)
    a, b = platt_fit_scores(f, y)
    ref = minimize(lambda v: _smoothed_nll(v[0], v[1], f, y), [0.0, 0.0], method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 5000}).x
    assert a == pytest.approx(ref[0], abs=1e-3) and b == pytest.approx(ref[1], abs=1e-3)


def test_platt_near_identity_on_calibrated_scores():
    r = np.random.default_rng(2)
    s = r.uniform(size=50_000)
    y = (r.uniform(size=s.size) < s).astype(int)
    a, b = platt_fit_scores(s, y)
    grid = np.linspace(0.1, 0.9, 81)
    assert np.max(np.abs(platt_transform(grid, a, b) - grid)) < 0.05


def test_platt_preserves_auc():
    r = np.random.default_rng(3)
    ids = [f"x{i}" for i in range(500)]
    s = r.uniform(size=500)
    truth = {i: int(v) for i, v in zip(ids, r.uniform(size=500) < s)}
    sub = SubmissionSet.from_arrays(ids, s)
    a, b = platt_fit(sub, truth)
    assert a < 0
    cal = platt_apply(sub, a, b)
    y = [truth[i] for i in ids]
    assert abs(auc_scores(cal.scores(ids), y) - auc_scores(s, y)) <= 1e-12
    assert calibration_table(cal, truth).n == 500


def test_platt_single_class_error():
    with pytest.raises(EvalError):
        platt_fit_scores([0.2, 0.4], [1, 1])


def test_max_gap_needs_a_qualifying_bin():
    table = calibration_scores([0.1, 0.9], [0, 1])
    assert table.max_gap(30) is None
    assert table.max_gap(1) == pytest.approx(0.1)
