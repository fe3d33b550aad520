"""AUC, ROC curves, bootstrap intervals and per-site stratification.

AUC uses midranks, so it equals the probability that a random positive
outscores a random negative with ties counted as one half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from ..manifest import DatasetManifest


class EvalError(ValueError):
    pass


class UndefinedAUC(EvalError):
    pass


@dataclass
class SubmissionSet:
    predictions: dict[str, float]
    team: str = ""
    timestamp: str = ""

    def __post_init__(self):
        clean = {}
        for item_id, score in self.predictions.items():
            s = float(score)
            if not math.isfinite(s) or not 0.0 <= s <= 1.0:
                raise EvalError(f"{item_id}: prediction {score!r} outside [0, 1]")
            clean[item_id] = s
        self.predictions = clean

    def __len__(self):
        return len(self.predictions)

    @property
    def ids(self) -> list[str]:
        return list(self.predictions)

    def scores(self, ids) -> np.ndarray:
        return np.array([self.predictions[i] for i in ids])

    @classmethod
    def from_arrays(cls, ids, scores, team="", timestamp=""):
        return cls(dict(zip(ids, (float(s) for s in scores))), team, timestamp)


def align(sub: SubmissionSet, truth) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Pair predictions with the labelled items of `truth`.

    `truth` is a manifest or an id -> 0/1 mapping. Items with unknown labels are
    skipped; every labelled item must have a prediction.
    """
    labels = truth.labels() if isinstance(truth, DatasetManifest) else dict(truth)
    ids = [i for i, l in labels.items() if l is not None]
    missing = [i for i in ids if i not in sub.predictions]
    if missing:
        raise EvalError(f"{len(missing)} labelled items have no prediction, e.g. {missing[:10]}")
    return ids, sub.scores(ids), np.array([int(labels[i]) for i in ids])


def auc_scores(scores, labels) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUC(f"AUC undefined: {n_pos} positives, {n_neg} negatives")
    ranks = rankdata(scores)  # midranks
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc(sub: SubmissionSet, truth) -> float:
    _, s, y = align(sub, truth)
    return auc_scores(s, y)


def auc_bruteforce(scores, labels) -> float:
    """Pair enumeration; the independent check for `auc_scores`."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    p, n = scores[labels == 1], scores[labels == 0]
    if p.size == 0 or n.size == 0:
        raise UndefinedAUC("AUC undefined for single-class labels")
    diff = p[:, None] - n[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / (p.size * n.size))


# -- ROC --------------------------------------------------------------------

@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # first entry is +inf (nothing called positive)

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))

    def area(self) -> float:
        return float(np.sum(np.diff(self.fpr) * (self.tpr[1:] + self.tpr[:-1]) / 2.0))


def roc_scores(scores, labels) -> RocCurve:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUC("ROC undefined for single-class labels")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]  # end of each tie block
    tp = np.cumsum(y == 1)[last]
    fp = np.cumsum(y == 0)[last]
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    return RocCurve(fpr, tpr, np.r_[np.inf, s[last]])


def roc_points(sub: SubmissionSet, truth) -> RocCurve:
    _, s, y = align(sub, truth)
    return roc_scores(s, y)


# -- bootstrap --------------------------------------------------------------

@dataclass
class BootstrapResult:
    point: float
    lo: float
    hi: float
    n_boot: int
    seed: int
    n_redrawn: int = 0
    replicates: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {"point": self.point, "lo": self.lo, "hi": self.hi, "n_boot": self.n_boot,
                "seed": self.seed, "n_redrawn": self.n_redrawn}


class _CountAUC:
    """AUC of a resample given as per-item multiplicities, in O(n) per resample."""

    def __init__(self, scores, labels):
        order = np.argsort(scores, kind="stable")
        s = np.asarray(scores, dtype=np.float64)[order]
        self.order = order
        self.pos = (np.asarray(labels)[order] == 1).astype(np.float64)
        n = s.size
        new_block = np.r_[True, s[1:] != s[:-1]]
        block_id = np.cumsum(new_block) - 1
        starts = np.flatnonzero(new_block)
        ends = np.r_[starts[1:], n]
        self.gs = starts[block_id]
        self.ge = ends[block_id]

    def __call__(self, counts: np.ndarray) -> np.ndarray:
        c = counts[:, self.order].astype(np.float64)
        cp = c * self.pos
        cn = c - cp
        cum = np.zeros((c.shape[0], c.shape[1] + 1))
        np.cumsum(cn, axis=1, out=cum[:, 1:])
        below = cum[:, self.gs]
        equal = cum[:, self.ge] - below
        n_pos, n_neg = cp.sum(axis=1), cn.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return (cp * (below + 0.5 * equal)).sum(axis=1) / (n_pos * n_neg)


def bootstrap_scores(scores, labels, n_boot: int = 1000, seed: int = 0, alpha: float = 0.05,
                     chunk: int = 200) -> BootstrapResult:
    """Percentile bootstrap CI for AUC; items resampled with replacement.

    Resamples containing a single class are redrawn and counted in `n_redrawn`.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    point = auc_scores(scores, labels)
    n = scores.size
    rng = np.random.default_rng(seed)
    f = _CountAUC(scores, labels)
    reps = np.empty(n_boot)
    filled = redrawn = 0
    offsets = None
    while filled < n_boot:
        m = min(chunk, n_boot - filled)
        idx = rng.integers(0, n, size=(m, n))
        if offsets is None or offsets.shape[0] != m:
            offsets = (np.arange(m) * n)[:, None]
        counts = np.bincount((idx + offsets).ravel(), minlength=m * n).reshape(m, n)
        vals = f(counts)
        ok = np.isfinite(vals)
        redrawn += int((~ok).sum())
        vals = vals[ok]
        reps[filled:filled + vals.size] = vals
        filled += vals.size
    lo, hi = np.percentile(reps, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return BootstrapResult(point, float(lo), float(hi), n_boot, seed, redrawn, reps)


def bootstrap_auc(sub: SubmissionSet, truth, n_boot: int = 1000, seed: int = 0) -> BootstrapResult:
    _, s, y = align(sub, truth)
    return bootstrap_scores(s, y, n_boot, seed)


# -- per-site ---------------------------------------------------------------

@dataclass
class SiteAUC:
    per_site: dict[str, float]
    mean: float
    pooled: float
    excluded: dict[str, str] = field(default_factory=dict)  # site -> reason

    def to_dict(self):
        return {"per_site": self.per_site, "mean": self.mean, "pooled": self.pooled,
                "excluded": self.excluded}


def per_site_auc(sub: SubmissionSet, truth: DatasetManifest) -> SiteAUC:
    """AUC within each site, their unweighted mean, and the pooled AUC.

    Sites whose labelled items hold a single class (or no labels) are excluded
    from the mean and listed in `excluded`.
    """
    by_site: dict[str, list] = {}
    for it in truth.items:
        if it.site is None:
            raise EvalError(f"{it.item_id}: no site tag")
        by_site.setdefault(it.site, []).append(it)
    per_site, excluded = {}, {}
    for site in sorted(by_site):
        labelled = [it for it in by_site[site] if it.label is not None]
        if not labelled:
            excluded[site] = "no labels"
            continue
        ys = {it.label for it in labelled}
        if len(ys) < 2:
            excluded[site] = "single class"
            continue
        per_site[site] = auc(sub, {it.item_id: it.label for it in labelled})
    if not per_site:
        raise UndefinedAUC("no site has both classes")
    mean = float(np.mean(list(per_site.values())))
    return SiteAUC(per_site, mean, auc(sub, truth), excluded)


def pooled_vs_mean_r2(results) -> float:
    """Squared Pearson correlation between pooled and per-site-mean AUC across submissions."""
    pooled = np.array([r.pooled for r in results])
    mean = np.array([r.mean for r in results])
    if pooled.size < 2:
        raise EvalError("need at least two submissions")
    if pooled.std() == 0 or mean.std() == 0:
        raise EvalError("correlation undefined for constant AUCs")
    return float(np.corrcoef(pooled, mean)[0, 1] ** 2)
