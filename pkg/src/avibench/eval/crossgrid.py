"""Matched / mismatched train-test grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..manifest import DatasetManifest
from ..pipeline import DetectorConfig, FeatureConfig, FeatureSet, featurize_manifest, predict_on, train_on
from .metrics import EvalError, auc


@dataclass
class CrossGrid:
    train_names: list[str]
    test_names: list[str]
    auc: np.ndarray  # [n_train, n_test]; diagonal = matched conditions

    def to_dict(self):
        return {"train": self.train_names, "test": self.test_names, "auc": self.auc.tolist()}


def _as_featureset(ds, feature_cfg, kind):
    if isinstance(ds, FeatureSet):
        return ds
    if isinstance(ds, DatasetManifest):
        return featurize_manifest(ds, feature_cfg, kinds=(kind,))
    raise TypeError(f"expected a DatasetManifest or FeatureSet, got {type(ds).__name__}")


def crossgrid(train_sets, test_sets, detector_cfg: DetectorConfig, feature_cfg: FeatureConfig | None = None,
              names=None) -> CrossGrid:
    """AUC for every (train, test) pair.

    `train_sets` / `test_sets` are sequences of manifests or pre-computed
    feature sets; `names` optionally labels them (defaults to dataset order).
    """
    feature_cfg = feature_cfg or FeatureConfig()
    kind = detector_cfg.input_kind
    train_sets, test_sets = list(train_sets), list(test_sets)
    if not train_sets or not test_sets:
        raise EvalError("crossgrid needs at least one train and one test dataset")
    for ds in train_sets:
        if len(ds.ids if isinstance(ds, FeatureSet) else ds.items) == 0:
            raise EvalError("empty train manifest")
    tr = [_as_featureset(d, feature_cfg, kind) for d in train_sets]
    te = [_as_featureset(d, feature_cfg, kind) for d in test_sets]
    grid = np.zeros((len(tr), len(te)))
    for i, fs in enumerate(tr):
        model = train_on(fs, detector_cfg, feature_cfg.hash())
        for j, target in enumerate(te):
            grid[i, j] = auc(predict_on(model, target), target.truth())
    names = names or [f"set{i}" for i in range(max(len(tr), len(te)))]
    return CrossGrid(list(names[:len(tr)]), list(names[:len(te)]), grid)
