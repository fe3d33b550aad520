"""Cross-submission analyses: ensembles, rank-PCA, re-validation and error triage."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from ..manifest import DatasetManifest
from .metrics import EvalError, SubmissionSet, auc_scores

# error categories used when annotating the most mismatched items
ERROR_CATEGORIES = (
    "Clear",
    "Dontknow",
    "Faint (e.g. v distant)",
    "Short call",
    "Noise-masking (inc wind, river)",
    "Insect",
    "Human (speech, laughter, tv, imitation)",
    "Rain (inc drops)",
    "Unusual bird sound",
    "Misc distractor",
    "Misc mammal",
)


def _common_ids(subs) -> list[str]:
    ids = set(subs[0].predictions)
    for s in subs[1:]:
        if set(s.predictions) != ids:
            missing = sorted(ids.symmetric_difference(s.predictions))
            raise EvalError(f"submissions cover different items, e.g. {missing[:10]}")
    return sorted(ids)


def ensemble_mean(subs, team: str = "ensemble-mean") -> SubmissionSet:
    subs = list(subs)
    if not subs:
        raise EvalError("no submissions to average")
    ids = _common_ids(subs)
    mat = np.array([s.scores(ids) for s in subs])
    return SubmissionSet.from_arrays(ids, mat.mean(axis=0), team)


@dataclass
class RankPCA:
    coords: np.ndarray  # [n_subs, dims]
    explained_variance: np.ndarray
    ids: list[str]


def rank_pca(subs, dims: int = 2) -> RankPCA:
    """Midrank-transform each submission, centre, and project onto the top components."""
    subs = list(subs)
    if len(subs) < 3:
        raise EvalError("rank-PCA needs at least three submissions")
    ids = _common_ids(subs)
    ranks = np.array([rankdata(s.scores(ids)) for s in subs])
    centred = ranks - ranks.mean(axis=0)
    u, sv, vt = np.linalg.svd(centred, full_matrices=False)
    # deterministic signs: largest-magnitude loading of each component positive
    signs = np.sign(vt[np.arange(vt.shape[0]), np.abs(vt).argmax(axis=1)])
    signs[signs == 0] = 1.0
    u, vt = u * signs, vt * signs[:, None]
    k = min(dims, sv.size)
    coords = np.zeros((len(subs), dims))
    coords[:, :k] = u[:, :k] * sv[:k]
    return RankPCA(coords, (sv ** 2 / max(len(subs) - 1, 1))[:dims], ids)


def _deviation_rows(sub: SubmissionSet, truth: DatasetManifest):
    rows = []
    for it in truth.items:
        if it.label is None:
            continue
        if it.item_id not in sub.predictions:
            raise EvalError(f"{it.item_id}: no prediction")
        s = sub.predictions[it.item_id]
        rows.append((it.item_id, it.label, s, abs(s - it.label)))
    rows.sort(key=lambda r: (-r[3], r[0]))
    return rows


def revalidation_candidates(mean_sub: SubmissionSet, truth: DatasetManifest,
                            neg_thresh: float = 0.2, pos_thresh: float = 0.3) -> list[str]:
    """Negatives scored above `neg_thresh` and positives scored below `pos_thresh`,
    most deviant first."""
    return [item_id for item_id, label, s, _ in _deviation_rows(mean_sub, truth)
            if (label == 0 and s > neg_thresh) or (label == 1 and s < pos_thresh)]


@dataclass(frozen=True)
class MismatchRow:
    rank: int
    item_id: str
    label: int
    score: float
    deviation: float


def top_mismatched(sub: SubmissionSet, truth: DatasetManifest, k: int = 500) -> list[MismatchRow]:
    rows = _deviation_rows(sub, truth)[:k]
    return [MismatchRow(r + 1, i, l, s, d) for r, (i, l, s, d) in enumerate(rows)]


def write_annotation_sheet(rows, path) -> Path:
    """CSV with one blank tick column per error category, ready for listeners to fill in."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["rank", "itemid", "hasbird", "prediction", "deviation", *ERROR_CATEGORIES, "notes"])
        for r in rows:
            w.writerow([r.rank, r.item_id, r.label, f"{r.score:.6f}", f"{r.deviation:.6f}",
                        *([""] * len(ERROR_CATEGORIES)), ""])
    return path


def interrater_auc(rater_a, rater_b) -> float:
    """AUC of annotator A's binary labels used as scores against annotator B's labels."""
    a, b = dict(rater_a), dict(rater_b)
    ids = sorted(set(a) & set(b))
    if len(ids) != len(a) or len(ids) != len(b):
        raise EvalError("annotators labelled different item sets")
    return auc_scores([float(a[i]) for i in ids], [int(b[i]) for i in ids])
