"""Glue between audio, features and detectors, shared by the CLI and experiment scripts."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .audio import AudioClip, normalize_peak, read_wav
from .detectors.adapt import AdaptationConfig, self_adapt
from .detectors.model import ForestDetector, GmmDetector, GMM_PAIR, RANDOM_FOREST, ModelError
from .eval.metrics import SubmissionSet
from .features.cache import FeatureCache
from .features.dictionary import DictionaryConfig
from .features.spectral import LOG_MEL, MFCC, log_mel, mel_bank, mfcc, stft
from .manifest import DatasetManifest


def derive_seed(seed: int, stage: str) -> int:
    """Per-stage seed: first 8 bytes of SHA-256("<seed>:<stage>") as an unsigned int."""
    return int.from_bytes(hashlib.sha256(f"{int(seed)}:{stage}".encode()).digest()[:8], "little")


@dataclass(frozen=True)
class FeatureConfig:
    frame_len: int = 1024
    hop: int = 512
    n_mels: int = 40
    dict_n_mels: int = 32
    fmin_hz: float = 50.0
    fmax_hz: float | None = None
    n_mfcc: int = 13
    log_floor: float = 1e-10
    normalize: bool = True
    headroom_db: float = 2.0

    def to_dict(self):
        return asdict(self)

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()).hexdigest()


@lru_cache(maxsize=16)
def _bank(sample_rate, frame_len, n_mels, fmin, fmax):
    return mel_bank(sample_rate, frame_len, n_mels, fmin, fmax)


def featurize_clip(clip: AudioClip, cfg: FeatureConfig, kind: str) -> np.ndarray:
    """Feature block for one clip: MFCC frames (kind="mfcc") or dictionary-input log-mel frames."""
    if cfg.normalize:
        clip = normalize_peak(clip, cfg.headroom_db)
    spec = stft(clip, cfg.frame_len, cfg.hop)
    if kind == MFCC:
        bank = _bank(clip.sample_rate_hz, cfg.frame_len, cfg.n_mels, cfg.fmin_hz, cfg.fmax_hz)
        return mfcc(log_mel(spec, bank, cfg.log_floor), cfg.n_mfcc).vectors
    if kind == LOG_MEL:
        bank = _bank(clip.sample_rate_hz, cfg.frame_len, cfg.dict_n_mels, cfg.fmin_hz, cfg.fmax_hz)
        return log_mel(spec, bank, cfg.log_floor).vectors
    raise ValueError(f"cannot featurize to kind {kind!r}")


@dataclass(eq=False)
class FeatureSet:
    """Feature blocks for a labelled (or partly labelled) set of clips."""
    ids: list[str]
    blocks: dict  # kind -> list of blocks, aligned with ids
    labels: list  # 0 / 1 / None
    sites: list = field(default_factory=list)

    def labelled(self, kind):
        keep = [i for i, l in enumerate(self.labels) if l is not None]
        return [self.blocks[kind][i] for i in keep], [self.labels[i] for i in keep]

    def truth(self) -> dict:
        return {i: l for i, l in zip(self.ids, self.labels) if l is not None}


def featurize_clips(items, cfg: FeatureConfig, kinds=(MFCC, LOG_MEL)) -> FeatureSet:
    """`items`: iterable of (item_id, AudioClip, label[, site])."""
    ids, labels, sites = [], [], []
    blocks = {k: [] for k in kinds}
    for row in items:
        item_id, clip, label = row[:3]
        ids.append(item_id)
        labels.append(label)
        sites.append(row[3] if len(row) > 3 else None)
        for k in kinds:
            blocks[k].append(featurize_clip(clip, cfg, k))
    return FeatureSet(ids, blocks, labels, sites)


def iter_manifest_clips(manifest: DatasetManifest, downmix: bool = False):
    for it in manifest.items:
        clip = read_wav(manifest.resolve(it), downmix=downmix)
        yield it.item_id, clip, it.label, it.site


def featurize_manifest(manifest: DatasetManifest, cfg: FeatureConfig, kinds=(MFCC, LOG_MEL)) -> FeatureSet:
    return featurize_clips(iter_manifest_clips(manifest), cfg, kinds)


def to_cache(fs: FeatureSet, kind: str, cfg: FeatureConfig) -> FeatureCache:
    return FeatureCache(kind, bytes.fromhex(cfg.hash())[:16], list(fs.ids), [np.asarray(b) for b in fs.blocks[kind]])


@dataclass(frozen=True)
class DetectorConfig:
    variant: str = GMM_PAIR
    seed: int = 0
    threads: int = 1
    # gmm-pair
    n_components: int = 8
    max_iter: int = 100
    tol: float = 1e-6
    tau: float = 1.0
    max_frames: int = 100_000
    # random-forest
    n_trees: int = 200
    max_depth: int = 25
    mtry: int | None = None
    k1: int = 100
    k2: int = 100
    patch_width: int = 4
    dict_max_iter: int = 50
    max_patches: int = 20000

    def __post_init__(self):
        if self.variant not in (GMM_PAIR, RANDOM_FOREST):
            raise ValueError(f"unknown detector variant {self.variant!r}")

    @property
    def input_kind(self) -> str:
        return MFCC if self.variant == GMM_PAIR else LOG_MEL

    def to_dict(self):
        return asdict(self)


def train_detector(blocks, labels, cfg: DetectorConfig, feature_hash: str = ""):
    if not blocks:
        raise ModelError("empty training set")
    seed = derive_seed(cfg.seed, "train")
    if cfg.variant == GMM_PAIR:
        return GmmDetector.fit(blocks, labels, n_components=cfg.n_components, max_iter=cfg.max_iter,
                               tol=cfg.tol, tau=cfg.tau, seed=seed, feature_hash=feature_hash,
                               max_frames=cfg.max_frames)
    dcfg = DictionaryConfig(patch_width=cfg.patch_width, k1=cfg.k1, k2=cfg.k2, max_iter=cfg.dict_max_iter,
                            max_patches=cfg.max_patches, seed=derive_seed(cfg.seed, "dictionary"))
    return ForestDetector.fit(blocks, labels, dict_config=dcfg, n_trees=cfg.n_trees, max_depth=cfg.max_depth,
                              mtry=cfg.mtry, seed=seed, n_threads=cfg.threads, feature_hash=feature_hash)


def predict(model, ids, blocks, team: str = "") -> SubmissionSet:
    return SubmissionSet.from_arrays(ids, model.score(blocks), team)


def train_on(fs: FeatureSet, cfg: DetectorConfig, feature_hash: str = ""):
    blocks, labels = fs.labelled(cfg.input_kind)
    return train_detector(blocks, labels, cfg, feature_hash)


def predict_on(model, fs: FeatureSet, team: str = "") -> SubmissionSet:
    return predict(model, fs.ids, fs.blocks[model.input_kind], team)


def adapt_on(model, train: FeatureSet, target: FeatureSet, acfg: AdaptationConfig, log=None):
    blocks, labels = train.labelled(model.input_kind)
    return self_adapt(model, blocks, labels, target.blocks[model.input_kind], acfg, target.ids, log)
