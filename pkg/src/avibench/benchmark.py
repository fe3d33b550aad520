"""Desk-scale synthetic shift benchmark (two sites, matched vs mismatched training).

Everything is derived from one seed, so results are reproducible bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .detectors.adapt import AdaptationConfig, AdaptationLog
from .eval.crossgrid import CrossGrid, crossgrid
from .eval.metrics import auc
from .pipeline import (DetectorConfig, FeatureConfig, FeatureSet, adapt_on, derive_seed, featurize_clips,
                       predict_on, train_on)
from .synth import PROFILES, SiteProfile, synth_items

SHIPPED_SEED = 7
# (n_train, n_test) per site and clip length used by the shipped experiments
SHIFT_SIZES = (600, 400)
# seeds the adaptation check is judged over (majority vote)
ADAPTATION_SEEDS = (7, 8, 9)
# thresholds on pool quantiles; raw scores drift under shift
BENCH_ADAPTATION = AdaptationConfig(0.2, 0.8, 500, selection="rank")
CLIP_LEN_S = 2.0
# (n_train, n_test) for the matched random-forest baseline on siteA
BASELINE_SIZES = (2000, 1000)


def site_featureset(profile: SiteProfile, n_items: int, split: str, seed: int, clip_len_s: float = CLIP_LEN_S,
                    feature_cfg: FeatureConfig | None = None, kinds=("mfcc", "log-mel")) -> FeatureSet:
    feature_cfg = feature_cfg or FeatureConfig()
    s = derive_seed(seed, f"{profile.name}/{split}")
    items = synth_items(profile, n_items, clip_len_s, s, id_prefix=f"{profile.name}-{split}")
    return featurize_clips(((i, c, l, profile.name) for i, c, l, _ in items), feature_cfg, kinds)


@dataclass
class ShiftBenchmark:
    train: dict  # site -> FeatureSet
    test: dict
    seed: int
    feature_cfg: FeatureConfig = field(default_factory=FeatureConfig)

    @property
    def sites(self):
        return list(self.train)


def build_shift_benchmark(seed: int = SHIPPED_SEED, sizes=SHIFT_SIZES, clip_len_s: float = CLIP_LEN_S,
                          sites=("siteA", "siteB"), kinds=("mfcc",)) -> ShiftBenchmark:
    n_train, n_test = sizes
    fc = FeatureConfig()
    train = {s: site_featureset(PROFILES[s], n_train, "train", seed, clip_len_s, fc, kinds) for s in sites}
    test = {s: site_featureset(PROFILES[s], n_test, "test", seed, clip_len_s, fc, kinds) for s in sites}
    return ShiftBenchmark(train, test, seed, fc)


def run_crossgrid(bench: ShiftBenchmark, detector_cfg: DetectorConfig | None = None) -> CrossGrid:
    detector_cfg = detector_cfg or DetectorConfig(seed=bench.seed)
    sites = bench.sites
    return crossgrid([bench.train[s] for s in sites], [bench.test[s] for s in sites], detector_cfg,
                     bench.feature_cfg, names=sites)


@dataclass
class AdaptationResult:
    target: str
    mismatched_source: str
    mismatched_before: float
    mismatched_after: float
    matched_before: float
    matched_after: float
    logs: dict

    @property
    def mismatched_improves(self) -> bool:
        return self.mismatched_after > self.mismatched_before

    @property
    def matched_not_improved(self) -> bool:
        return self.matched_after <= self.matched_before + 0.01

    def to_dict(self):
        return {k: getattr(self, k) for k in ("target", "mismatched_source", "mismatched_before",
                                               "mismatched_after", "matched_before", "matched_after")}


def run_adaptation(bench: ShiftBenchmark, target: str = "siteB", source: str = "siteA",
                   detector_cfg: DetectorConfig | None = None,
                   adapt_cfg: AdaptationConfig | None = None) -> AdaptationResult:
    """First stage vs second stage on `target`, trained on `source` (mismatched) and `target` (matched).

    The unlabeled adaptation pool is the target test set itself, as in
    transductive second-stage adaptation.
    """
    detector_cfg = detector_cfg or DetectorConfig(seed=bench.seed)
    adapt_cfg = adapt_cfg or BENCH_ADAPTATION
    pool = bench.test[target]
    truth = pool.truth()
    out, logs = {}, {}
    for name, train_site in (("mismatched", source), ("matched", target)):
        train = bench.train[train_site]
        model = train_on(train, detector_cfg, bench.feature_cfg.hash())
        log = AdaptationLog()
        adapted = adapt_on(model, train, pool, adapt_cfg, log)
        out[name] = (auc(predict_on(model, pool), truth), auc(predict_on(adapted, pool), truth))
        logs[name] = log
    return AdaptationResult(target, source, *out["mismatched"], *out["matched"], logs)


@dataclass
class BaselineResult:
    site: str
    variant: str
    n_train: int
    n_test: int
    auc: float
    seconds: float

    def to_dict(self):
        return dict(vars(self))


def run_matched_baseline(seed: int = SHIPPED_SEED, sizes=BASELINE_SIZES, site: str = "siteA",
                         detector_cfg: DetectorConfig | None = None, clip_len_s: float = CLIP_LEN_S) -> BaselineResult:
    """Train and test on the same site; `seconds` covers synthesis, features, training and scoring."""
    detector_cfg = detector_cfg or DetectorConfig(variant="random-forest", seed=seed)
    t0 = time.perf_counter()
    fc = FeatureConfig()
    kinds = (detector_cfg.input_kind,)
    train = site_featureset(PROFILES[site], sizes[0], "train", seed, clip_len_s, fc, kinds)
    test = site_featureset(PROFILES[site], sizes[1], "test", seed, clip_len_s, fc, kinds)
    model = train_on(train, detector_cfg, fc.hash())
    value = auc(predict_on(model, test), test.truth())
    return BaselineResult(site, detector_cfg.variant, sizes[0], sizes[1], value, time.perf_counter() - t0)
