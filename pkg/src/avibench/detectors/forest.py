"""Random forest of Gini-split decision trees over per-clip summary vectors.

Each tree draws from its own child of a SeedSequence, so the fitted forest
depends only on (data, seed) and not on how trees are scheduled on threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

LEAF = -1


class ForestError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray  # int32, LEAF for leaves
    threshold: np.ndarray  # go left when x[feature] <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # positive-class fraction at each node

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of `x`."""
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            n = node[rows]
            go_left = x[rows, self.feature[n]] <= self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])
            active[rows] = self.feature[node[rows]] != LEAF
        return node

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]


@dataclass(frozen=True, eq=False)
class RandomForest:
    trees: tuple
    n_features: int
    max_depth: int
    mtry: int
    seed: int
    params: dict = field(default_factory=dict)

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _best_split(xs: np.ndarray, w: np.ndarray, wy: np.ndarray):
    """Best Gini split over the columns of `xs` for the weighted node sample.

    Returns (column, threshold, weighted impurity) or None when no column varies.
    """
    order = np.argsort(xs, axis=0, kind="stable")
    vals = np.take_along_axis(xs, order, axis=0)
    wl = np.cumsum(w[order], axis=0)[:-1]
    pl = np.cumsum(wy[order], axis=0)[:-1]
    total, ptotal = w.sum(), wy.sum()
    wr, pr = total - wl, ptotal - pl
    nl, nr = wl - pl, wr - pr
    with np.errstate(divide="ignore", invalid="ignore"):
        imp = (wl - (pl ** 2 + nl ** 2) / wl) + (wr - (pr ** 2 + nr ** 2) / wr)
    valid = vals[:-1] < vals[1:]
    if not valid.any():
        return None
    imp = np.where(valid, imp, np.inf)
    flat = int(np.argmin(imp))
    i, col = divmod(flat, xs.shape[1])
    lo, hi = vals[i, col], vals[i + 1, col]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return col, float(thr), float(imp[i, col])


def grow_tree(x: np.ndarray, y: np.ndarray, counts: np.ndarray, max_depth: int, mtry: int,
              rng: np.random.Generator, min_samples_split: int = 2) -> Tree:
    """Grow one tree on the rows with non-zero bootstrap `counts` (used as weights)."""
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(val):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(val)
        return len(feature) - 1

    root_idx = np.flatnonzero(counts > 0)
    yw = y * counts
    root = new_node(float(yw[root_idx].sum() / counts[root_idx].sum()))
    stack = [(root, root_idx, 0)]
    n_feat = x.shape[1]
    while stack:
        node, idx, depth = stack.pop()
        w = counts[idx]
        p = value[node]
        if depth >= max_depth or w.sum() < min_samples_split or p in (0.0, 1.0):
            continue
        total, ptot = w.sum(), yw[idx].sum()
        parent_imp = total - (ptot ** 2 + (total - ptot) ** 2) / total
        cols = rng.choice(n_feat, size=min(mtry, n_feat), replace=False)
        found = _best_split(x[np.ix_(idx, cols)], w, yw[idx])
        if found is None or found[2] >= parent_imp - 1e-12:
            continue
        col, thr, _ = found
        f = int(cols[col])
        go_left = x[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        ln = new_node(float(yw[li].sum() / counts[li].sum()))
        rn = new_node(float(yw[ri].sum() / counts[ri].sum()))
        feature[node], threshold[node], left[node], right[node] = f, thr, ln, rn
        # push right first so the left subtree is numbered first
        stack.append((rn, ri, depth + 1))
        stack.append((ln, li, depth + 1))
    return Tree(np.array(feature, dtype=np.int32), np.array(threshold), np.array(left, dtype=np.int32),
                np.array(right, dtype=np.int32), np.array(value))


def rf_fit(vectors, labels, n_trees: int = 200, max_depth: int = 25, mtry: int | None = None,
           seed: int = 0, n_threads: int = 1, bootstrap: bool = True) -> RandomForest:
    x = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ForestError("vectors must be [n, dim] with one label per row")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ForestError("labels must be 0/1")
    if np.unique(y).size < 2:
        raise ForestError("single-class input: need both positive and negative examples")
    if n_trees < 1 or max_depth < 1:
        raise ForestError("n_trees and max_depth must be positive")
    mtry = mtry or max(1, int(math.sqrt(x.shape[1])))
    children = np.random.SeedSequence(seed).spawn(n_trees)

    def build(ss):
        rng = np.random.default_rng(ss)
        if bootstrap:
            counts = np.bincount(rng.integers(0, x.shape[0], x.shape[0]), minlength=x.shape[0])
        else:
            counts = np.ones(x.shape[0], dtype=np.int64)
        return grow_tree(x, y, counts.astype(np.float64), max_depth, mtry, rng)

    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            trees = tuple(pool.map(build, children))
    else:
        trees = tuple(build(ss) for ss in children)
    params = dict(n_trees=n_trees, max_depth=max_depth, mtry=mtry, seed=seed, bootstrap=bootstrap)
    return RandomForest(trees, x.shape[1], max_depth, mtry, seed, params)


def rf_score(model: RandomForest, vectors) -> np.ndarray | float:
    """Mean over trees of the leaf positive-fraction. Accepts one vector or a matrix."""
    x = np.asarray(vectors, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.n_features:
        raise ForestError(f"expected {model.n_features} features, got {x.shape[1]}")
    total = np.zeros(x.shape[0])
    for t in model.trees:
        total += t.predict(x)
    score = np.clip(total / model.n_trees, 0.0, 1.0)
    return float(score[0]) if single else score
