"""Reliability tables and Platt scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .metrics import EvalError, SubmissionSet, align


@dataclass(frozen=True)
class CalibrationBin:
    lo: float
    hi: float
    count: int
    mean_predicted: float | None  # None for empty bins
    empirical_rate: float | None


@dataclass
class CalibrationTable:
    bins: list[CalibrationBin]

    @property
    def n(self) -> int:
        return sum(b.count for b in self.bins)

    def max_gap(self, min_count: int = 1) -> float | None:
        """Largest |empirical rate - mean predicted| over bins holding >= min_count items (None if no bin does)."""
        gaps = [abs(b.empirical_rate - b.mean_predicted) for b in self.bins if b.count >= max(min_count, 1)]
        return max(gaps) if gaps else None

    def to_rows(self):
        return [{"lo": b.lo, "hi": b.hi, "count": b.count, "mean_predicted": b.mean_predicted,
                 "empirical_rate": b.empirical_rate} for b in self.bins]


def calibration_scores(scores, labels, n_bins: int = 10) -> CalibrationTable:
    """Equal-width bins over [0, 1]; a score of exactly 1 falls in the last bin."""
    if n_bins < 1:
        raise EvalError("n_bins must be positive")
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    idx = np.minimum((scores * n_bins).astype(np.int64), n_bins - 1)
    bins = []
    for b in range(n_bins):
        m = idx == b
        count = int(m.sum())
        if count:
            bins.append(CalibrationBin(b / n_bins, (b + 1) / n_bins, count,
                                       float(scores[m].mean()), float(labels[m].mean())))
        else:
            bins.append(CalibrationBin(b / n_bins, (b + 1) / n_bins, 0, None, None))
    return CalibrationTable(bins)


def calibration_table(sub: SubmissionSet, truth, n_bins: int = 10) -> CalibrationTable:
    _, s, y = align(sub, truth)
    return calibration_scores(s, y, n_bins)


def platt_fit_scores(scores, labels, max_iter: int = 100, min_step: float = 1e-10,
                     sigma: float = 1e-12) -> tuple[float, float]:
    """Fit p = 1 / (1 + exp(A*s + B)) by Newton's method with backtracking.

    Targets are smoothed to (N+ + 1)/(N+ + 2) and 1/(N- + 2) as in Platt's
    original recipe; `sigma` regularizes the Hessian.
    """
    f = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvalError("Platt scaling needs both classes in the calibration split")
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def objective(a, b):
        z = f * a + b
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-np.abs(z))),
                                     (t - 1) * z + np.log1p(np.exp(-np.abs(z))))))

    a, b = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    fval = objective(a, b)
    for _ in range(max_iter):
        z = f * a + b
        p = expit(-z)
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + np.sum(f * f * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(f * d2)
        d1 = t - p
        g1, g2 = np.sum(f * d1), np.sum(d1)
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= min_step:
            na, nb = a + step * da, b + step * db
            nf = objective(na, nb)
            if nf < fval + 1e-4 * step * gd:
                a, b, fval = na, nb, nf
                break
            step /= 2.0
        else:
            break
    return float(a), float(b)


def platt_fit(sub: SubmissionSet, truth) -> tuple[float, float]:
    _, s, y = align(sub, truth)
    return platt_fit_scores(s, y)


def platt_transform(scores, a: float, b: float) -> np.ndarray:
    return expit(-(np.asarray(scores, dtype=np.float64) * a + b))


def platt_apply(sub: SubmissionSet, a: float, b: float) -> SubmissionSet:
    ids = sub.ids
    return SubmissionSet.from_arrays(ids, platt_transform(sub.scores(ids), a, b), sub.team, sub.timestamp)
