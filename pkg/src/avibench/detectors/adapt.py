"""Two-stage self-adaptation: retrain on the detector's own confident predictions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class AdaptationConfig:
    low_threshold: float = 0.1
    high_threshold: float = 0.9
    max_added: int = 500  # per class per round
    rounds: int = 1
    # "score": thresholds apply to raw scores; "rank": they apply to the pool's
    # empirical score quantiles, which survives the score drift of a shifted domain
    selection: str = "score"

    def __post_init__(self):
        if not 0.0 <= self.low_threshold < self.high_threshold <= 1.0:
            raise ValueError("need 0 <= low_threshold < high_threshold <= 1")
        if self.selection not in ("score", "rank"):
            raise ValueError("selection must be 'score' or 'rank'")
        if self.max_added < 0:
            raise ValueError("max_added must be non-negative")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


@dataclass
class AdaptationLog:
    rounds: list = field(default_factory=list)  # per round: {"positive": [...ids], "negative": [...ids]}


def select_confident(scores, ids, cfg: AdaptationConfig):
    """Ids pseudo-labelled positive (score >= high) and negative (score <= low).

    With ``selection="rank"`` scores are first replaced by their quantile in
    the pool. The most confident items are taken first, up to `max_added` per class;
    ties are broken by item id.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if cfg.selection == "rank" and scores.size:
        # midrank quantiles in (0, 1)
        scores = (rankdata(scores) - 0.5) / scores.size
    pos = sorted((-s, i) for s, i in zip(scores, ids) if s >= cfg.high_threshold)
    neg = sorted((s, i) for s, i in zip(scores, ids) if s <= cfg.low_threshold)
    return [i for _, i in pos[:cfg.max_added]], [i for _, i in neg[:cfg.max_added]]


def self_adapt(model, train_blocks, train_labels, unlabeled_blocks, cfg: AdaptationConfig | None = None,
               unlabeled_ids=None, log: AdaptationLog | None = None):
    """Pseudo-label the unlabeled pool and retrain; returns the last-round model.

    The original training data is needed because every round retrains from
    scratch on original + pseudo-labelled items. If nothing is selected the
    input model is returned as is.
    """
    cfg = cfg or AdaptationConfig()
    unlabeled_blocks = list(unlabeled_blocks)
    if not unlabeled_blocks:
        return model
    if unlabeled_ids is None:
        width = len(str(len(unlabeled_blocks)))
        unlabeled_ids = [f"u{i:0{width}d}" for i in range(len(unlabeled_blocks))]
    by_id = dict(zip(unlabeled_ids, unlabeled_blocks))
    train_blocks, train_labels = list(train_blocks), list(train_labels)
    current = model
    for _ in range(cfg.rounds):
        scores = current.score(unlabeled_blocks)
        pos, neg = select_confident(scores, unlabeled_ids, cfg)
        if log is not None:
            log.rounds.append({"positive": pos, "negative": neg})
        if not pos and not neg:
            break
        blocks = train_blocks + [by_id[i] for i in pos] + [by_id[i] for i in neg]
        labels = train_labels + [1] * len(pos) + [0] * len(neg)
        current = current.refit(blocks, labels)
    return current
