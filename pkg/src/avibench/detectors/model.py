"""Trainable clip scorers and their binary model files.

Both detectors take one feature block per clip (a [frames, dim] matrix read
from the feature cache) and emit one score in [0, 1] per clip:

* ``GmmDetector`` works on MFCC frames and compares per-class mixtures.
* ``ForestDetector`` learns a two-layer dictionary from log-mel frames,
  summarizes each clip and scores the summary with a random forest.

Model file layout (little-endian)::

    0   4   magic b"AVMD"
    4   2   version (=1)
    6   1   variant tag (1 gmm-pair, 2 random-forest)
    7   1   reserved
    8   32  SHA-256 of the feature config the model was trained on
    40  8   payload length
    48  ..  payload: uint32 meta length, JSON meta, raw array bytes
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..features.dictionary import DictionaryConfig, FeatureDictionary, encode_pool, learn_dictionary
from ..features.spectral import LOG_MEL, MFCC, FeatureFrames, StandardizeStats, standardize
from .forest import RandomForest, Tree, rf_fit, rf_score
from .gmm import DiagGmm, GmmPair, gmm_fit, gmm_score

MAGIC = b"AVMD"
VERSION = 1
GMM_PAIR = "gmm-pair"
RANDOM_FOREST = "random-forest"
VARIANT_TAGS = {GMM_PAIR: 1, RANDOM_FOREST: 2}
_HEAD = struct.Struct("<4sHBB32sQ")


class ModelError(ValueError):
    pass


def _check_labels(blocks, labels):
    labels = np.asarray(labels, dtype=np.int64)
    if len(blocks) != labels.size:
        raise ModelError(f"{len(blocks)} feature blocks but {labels.size} labels")
    if not set(np.unique(labels)) <= {0, 1}:
        raise ModelError("labels must be 0/1")
    return labels


@dataclass(eq=False)
class GmmDetector:
    pair: GmmPair
    stats: StandardizeStats
    feature_hash: str = ""
    max_frames: int = 100_000
    variant = GMM_PAIR
    input_kind = MFCC

    @classmethod
    def fit(cls, blocks, labels, *, n_components=8, max_iter=100, tol=1e-6, tau=1.0, seed=0,
            feature_hash="", max_frames=100_000):
        labels = _check_labels(blocks, labels)
        if labels.min() == labels.max():
            raise ModelError("need both positive and negative training clips")
        _, stats = standardize(np.concatenate([np.asarray(b) for b in blocks]))
        rng = np.random.default_rng([seed, 1])
        pools = {}
        for cls_label in (0, 1):
            frames = np.concatenate([np.asarray(b) for b, l in zip(blocks, labels) if l == cls_label])
            if frames.shape[0] > max_frames:
                frames = frames[np.sort(rng.choice(frames.shape[0], max_frames, replace=False))]
            pools[cls_label] = standardize(frames, stats)[0]
        pair = gmm_fit(pools, n_components=n_components, max_iter=max_iter, tol=tol, seed=seed, tau=tau)
        return cls(pair, stats, feature_hash, max_frames)

    def refit(self, blocks, labels):
        p = self.pair.params
        return GmmDetector.fit(blocks, labels, n_components=p["n_components"], max_iter=p["max_iter"],
                               tol=p["tol"], tau=self.pair.tau, seed=p["seed"],
                               feature_hash=self.feature_hash, max_frames=self.max_frames)

    def score_one(self, block) -> float:
        x, _ = standardize(np.asarray(block, dtype=np.float64), self.stats)
        return gmm_score(self.pair, x)

    def score(self, blocks) -> np.ndarray:
        return np.array([self.score_one(b) for b in blocks])


@dataclass(eq=False)
class ForestDetector:
    forest: RandomForest
    dictionary: FeatureDictionary
    feature_hash: str = ""
    variant = RANDOM_FOREST
    input_kind = LOG_MEL

    @classmethod
    def fit(cls, blocks, labels, *, dict_config: DictionaryConfig | None = None, n_trees=200,
            max_depth=25, mtry=None, seed=0, n_threads=1, feature_hash=""):
        labels = _check_labels(blocks, labels)
        melspecs = [FeatureFrames(b, LOG_MEL) for b in blocks]
        if dict_config is None:
            dict_config = DictionaryConfig(seed=seed)
        dictionary = learn_dictionary(melspecs, dict_config)
        vectors = np.array([encode_pool(m, dictionary) for m in melspecs])
        forest = rf_fit(vectors, labels, n_trees=n_trees, max_depth=max_depth, mtry=mtry,
                        seed=seed, n_threads=n_threads)
        return cls(forest, dictionary, feature_hash)

    def encode(self, blocks) -> np.ndarray:
        return np.array([encode_pool(FeatureFrames(b, LOG_MEL), self.dictionary) for b in blocks])

    def refit(self, blocks, labels):
        """Retrain the forest with the same hyperparameters; the dictionary is kept."""
        labels = _check_labels(blocks, labels)
        p = self.forest.params
        forest = rf_fit(self.encode(blocks), labels, n_trees=p["n_trees"], max_depth=p["max_depth"],
                        mtry=p["mtry"], seed=p["seed"], bootstrap=p["bootstrap"])
        return ForestDetector(forest, self.dictionary, self.feature_hash)

    def score(self, blocks) -> np.ndarray:
        return np.asarray(rf_score(self.forest, self.encode(blocks)), dtype=np.float64).reshape(-1)


DetectorModel = GmmDetector | ForestDetector


# -- serialization ----------------------------------------------------------

def _pack(meta: dict, arrays: dict) -> bytes:
    table, chunks, offset = [], [], 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        dt = a.dtype.newbyteorder("<")
        raw = a.astype(dt, copy=False).tobytes()
        table.append({"name": name, "dtype": dt.str, "shape": list(a.shape),
                      "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    head = json.dumps({"meta": meta, "arrays": table}, sort_keys=True, separators=(",", ":")).encode()
    return struct.pack("<I", len(head)) + head + b"".join(chunks)


def _unpack(payload: bytes):
    (n,) = struct.unpack_from("<I", payload)
    head = json.loads(payload[4:4 + n])
    base = 4 + n
    arrays = {}
    for e in head["arrays"]:
        buf = payload[base + e["offset"]: base + e["offset"] + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(buf, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return head["meta"], arrays


def _gmm_arrays(prefix, g: DiagGmm):
    return {f"{prefix}.weights": g.weights, f"{prefix}.means": g.means, f"{prefix}.variances": g.variances}


def _gmm_from(prefix, arrays, trace):
    return DiagGmm(arrays[f"{prefix}.weights"], arrays[f"{prefix}.means"], arrays[f"{prefix}.variances"],
                   tuple(trace))


def _dictionary_arrays(d: FeatureDictionary):
    return {"dict.l1": d.layer1_centroids, "dict.l2": d.layer2_centroids,
            "dict.mean": d.whiten_mean, "dict.whiten": d.whiten_matrix}


def model_to_bytes(model) -> bytes:
    if isinstance(model, GmmDetector):
        p = model.pair
        meta = {"tau": p.tau, "var_floor": p.var_floor, "params": p.params, "max_frames": model.max_frames,
                "trace_pos": list(p.positive.loglik_trace), "trace_neg": list(p.negative.loglik_trace)}
        arrays = {**_gmm_arrays("pos", p.positive), **_gmm_arrays("neg", p.negative),
                  "stats.mean": model.stats.mean, "stats.std": model.stats.std}
    elif isinstance(model, ForestDetector):
        f = model.forest
        sizes = np.array([t.n_nodes for t in f.trees], dtype=np.int64)
        meta = {"params": f.params, "n_features": f.n_features, "max_depth": f.max_depth,
                "mtry": f.mtry, "seed": f.seed, "dict_config": model.dictionary.config.to_dict()}
        arrays = {"tree.sizes": sizes, **_dictionary_arrays(model.dictionary)}
        for attr in ("feature", "threshold", "left", "right", "value"):
            arrays[f"tree.{attr}"] = np.concatenate([getattr(t, attr) for t in f.trees])
    else:
        raise ModelError(f"cannot serialize {type(model).__name__}")
    payload = _pack(meta, arrays)
    digest = bytes.fromhex(model.feature_hash) if model.feature_hash else bytes(32)
    return _HEAD.pack(MAGIC, VERSION, VARIANT_TAGS[model.variant], 0, digest, len(payload)) + payload


def model_from_bytes(data: bytes):
    if len(data) < _HEAD.size:
        raise ModelError("model file truncated")
    magic, version, tag, _, digest, n = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise ModelError("not a model file (bad magic)")
    if version != VERSION:
        raise ModelError(f"unsupported model version {version}")
    meta, arrays = _unpack(data[_HEAD.size:_HEAD.size + n])
    fhash = "" if digest == bytes(32) else digest.hex()
    if tag == VARIANT_TAGS[GMM_PAIR]:
        pair = GmmPair(_gmm_from("pos", arrays, meta["trace_pos"]), _gmm_from("neg", arrays, meta["trace_neg"]),
                       meta["var_floor"], meta["tau"], meta["params"])
        stats = StandardizeStats(arrays["stats.mean"], arrays["stats.std"])
        return GmmDetector(pair, stats, fhash, meta["max_frames"])
    if tag == VARIANT_TAGS[RANDOM_FOREST]:
        bounds = np.concatenate([[0], np.cumsum(arrays["tree.sizes"])])
        trees = tuple(
            Tree(*(arrays[f"tree.{a}"][s:e] for a in ("feature", "threshold", "left", "right", "value")))
            for s, e in zip(bounds[:-1], bounds[1:]))
        forest = RandomForest(trees, meta["n_features"], meta["max_depth"], meta["mtry"], meta["seed"],
                              meta["params"])
        dictionary = FeatureDictionary(arrays["dict.l1"], arrays["dict.l2"], arrays["dict.mean"],
                                       arrays["dict.whiten"], DictionaryConfig(**meta["dict_config"]))
        return ForestDetector(forest, dictionary, fhash)
    raise ModelError(f"unknown variant tag {tag}")


def save_model(model, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(model_to_bytes(model))
    return path


def load_model(path):
    return model_from_bytes(Path(path).read_bytes())


def check_feature_hash(model, feature_hash: str):
    """Refuse features produced under a different feature config."""
    if model.feature_hash and feature_hash and model.feature_hash != feature_hash:
        raise ModelError(f"feature config hash mismatch: model {model.feature_hash[:12]}..., "
                         f"features {feature_hash[:12]}...")


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).hexdigest()
