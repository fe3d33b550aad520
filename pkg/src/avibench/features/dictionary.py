"""Two-layer unsupervised feature learning over mel spectrograms.

Layer 1 clusters whitened, unit-normalized spectro-temporal patches with
spherical k-means. Layer-1 activations are max-pooled in time and clustered
again to form layer 2. A clip is summarized by max- and mean-pooling the
rectified cosine responses of both layers.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import LEARNED_L1, LEARNED_L2, LOG_MEL, FeatureError, FeatureFrames

GATE_EPS = 1e-8


@dataclass(frozen=True)
class DictionaryConfig:
    patch_width: int = 4
    k1: int = 100
    k2: int = 100
    downsample: int = 2
    max_iter: int = 50
    max_patches: int = 20000
    eig_floor: float = 1e-12  # relative to the largest eigenvalue
    seed: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class FeatureDictionary:
    layer1_centroids: np.ndarray  # [k1, patch_dim]
    layer2_centroids: np.ndarray  # [k2, k1]
    whiten_mean: np.ndarray
    whiten_matrix: np.ndarray
    config: DictionaryConfig = field(default_factory=DictionaryConfig)
    layer1_objective: tuple = ()
    layer2_objective: tuple = ()

    @property
    def patch_dim(self) -> int:
        return self.layer1_centroids.shape[1]

    @property
    def summary_dim(self) -> int:
        return 2 * (self.layer1_centroids.shape[0] + self.layer2_centroids.shape[0])


@dataclass(frozen=True, eq=False)
class SphericalKMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    objective: tuple
    n_iter: int
    converged: bool


def unit_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalize rows to unit length; rows with (near) zero norm are zeroed and masked off."""
    norms = np.linalg.norm(x, axis=1)
    live = norms > GATE_EPS
    out = np.zeros_like(x)
    out[live] = x[live] / norms[live, None]
    return out, live


def spherical_kmeans(x: np.ndarray, k: int, max_iter: int = 50, rng=None,
                     init: np.ndarray | None = None) -> SphericalKMeansResult:
    """Cluster unit-norm rows of `x` by cosine similarity.

    The objective (sum over rows of the best cosine similarity) never decreases:
    clusters that empty out keep their previous centroid.
    """
    if k <= 0:
        raise FeatureError("k must be positive")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < k:
        raise FeatureError(f"insufficient data: {x.shape[0]} vectors for k={k}")
    rng = np.random.default_rng(rng)
    if init is None:
        c = x[rng.choice(x.shape[0], size=k, replace=False)].copy()
    else:
        c = np.array(init, dtype=np.float64)
    c, _ = unit_rows(c)
    labels = None
    objective = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        sims = x @ c.T
        new_labels = sims.argmax(axis=1)
        objective.append(float(sims[np.arange(x.shape[0]), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        onehot = np.zeros((x.shape[0], k))
        onehot[np.arange(x.shape[0]), labels] = 1.0
        sums = onehot.T @ x
        norms = np.linalg.norm(sums, axis=1)
        ok = norms > GATE_EPS
        c[ok] = sums[ok] / norms[ok, None]
    return SphericalKMeansResult(c, labels, tuple(objective), it, converged)


def extract_patches(melspec: FeatureFrames, width: int) -> np.ndarray:
    """Flattened sliding windows of `width` consecutive frames, one row per window."""
    v = melspec.vectors
    if v.shape[0] < width:
        return np.zeros((0, width * v.shape[1]))
    win = np.lib.stride_tricks.sliding_window_view(v, width, axis=0)  # [n, dim, width]
    return win.transpose(0, 2, 1).reshape(win.shape[0], -1)


def _patch_live(patches: np.ndarray) -> np.ndarray:
    # constant patches (e.g. digital silence) carry no shape information
    return patches.std(axis=1) > GATE_EPS


def fit_whitening(patches: np.ndarray, eig_floor: float = 1e-12):
    mean = patches.mean(axis=0)
    centred = patches - mean
    cov = centred.T @ centred / patches.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    evals = np.maximum(evals, eig_floor * max(evals.max(), GATE_EPS))
    w = (evecs / np.sqrt(evals)) @ evecs.T
    return mean, w


def _layer1_responses(melspec: FeatureFrames, d: FeatureDictionary) -> np.ndarray:
    patches = extract_patches(melspec, d.config.patch_width)
    if patches.shape[1] != d.patch_dim:
        raise FeatureError(f"patch dim {patches.shape[1]} does not match dictionary ({d.patch_dim})")
    live = _patch_live(patches)
    white = np.zeros_like(patches)
    white[live] = (patches[live] - d.whiten_mean) @ d.whiten_matrix
    white, _ = unit_rows(white)
    return np.maximum(white @ d.layer1_centroids.T, 0.0)


def downsample_max(act: np.ndarray, factor: int) -> np.ndarray:
    n = act.shape[0] // factor
    if n == 0:
        return act.max(axis=0, keepdims=True) if act.shape[0] else act
    return act[:n * factor].reshape(n, factor, -1).max(axis=1)


def _layer2_responses(a1: np.ndarray, d: FeatureDictionary) -> np.ndarray:
    pooled, _ = unit_rows(downsample_max(a1, d.config.downsample))
    return np.maximum(pooled @ d.layer2_centroids.T, 0.0)


def learn_dictionary(melspecs, config: DictionaryConfig | None = None) -> FeatureDictionary:
    config = config or DictionaryConfig()
    if config.k1 <= 0 or config.k2 <= 0:
        raise FeatureError("k1 and k2 must be positive")
    rng = np.random.default_rng(config.seed)
    melspecs = list(melspecs)
    for m in melspecs:
        if m.kind != LOG_MEL:
            raise FeatureError(f"dictionary learning needs log-mel input, got {m.kind}")
    patches = [extract_patches(m, config.patch_width) for m in melspecs]
    patches = np.concatenate(patches) if patches else np.zeros((0, 0))
    if patches.shape[0]:
        patches = patches[_patch_live(patches)]
    if patches.shape[0] < max(config.k1, 2):
        raise FeatureError(f"insufficient data: {patches.shape[0]} usable patches for k1={config.k1}")
    if patches.shape[0] > config.max_patches:
        patches = patches[np.sort(rng.choice(patches.shape[0], config.max_patches, replace=False))]

    mean, w = fit_whitening(patches, config.eig_floor)
    x1, _ = unit_rows((patches - mean) @ w)
    km1 = spherical_kmeans(x1, config.k1, config.max_iter, rng)

    partial = FeatureDictionary(km1.centroids, np.zeros((config.k2, config.k1)), mean, w, config)
    pooled = [downsample_max(_layer1_responses(m, partial), config.downsample) for m in melspecs]
    x2, live = unit_rows(np.concatenate(pooled))
    x2 = x2[live]
    if x2.shape[0] < config.k2:
        raise FeatureError(f"insufficient data: {x2.shape[0]} layer-2 vectors for k2={config.k2}")
    if x2.shape[0] > config.max_patches:
        x2 = x2[np.sort(rng.choice(x2.shape[0], config.max_patches, replace=False))]
    km2 = spherical_kmeans(x2, config.k2, config.max_iter, rng)
    return FeatureDictionary(km1.centroids, km2.centroids, mean, w, config,
                             km1.objective, km2.objective)


def encode_layers(melspec: FeatureFrames, d: FeatureDictionary) -> tuple[FeatureFrames, FeatureFrames]:
    a1 = _layer1_responses(melspec, d)
    a2 = _layer2_responses(a1, d)
    return FeatureFrames(a1, LEARNED_L1), FeatureFrames(a2, LEARNED_L2)


def encode_pool(melspec: FeatureFrames, d: FeatureDictionary) -> np.ndarray:
    """One fixed-length vector per clip: [max L1, mean L1, max L2, mean L2]."""
    if melspec.dim * d.config.patch_width != d.patch_dim:
        raise FeatureError(f"melspec has {melspec.dim} bands; dictionary expects "
                           f"{d.patch_dim // d.config.patch_width}")
    l1, l2 = encode_layers(melspec, d)
    return np.concatenate([pool(l1.vectors, d.layer1_centroids.shape[0]),
                           pool(l2.vectors, d.layer2_centroids.shape[0])])


def pool(activations: np.ndarray, k: int | None = None) -> np.ndarray:
    """Temporal max-pool followed by mean-pool, concatenated."""
    if activations.shape[0] == 0:
        k = activations.shape[1] if k is None else k
        return np.zeros(2 * k)
    return np.concatenate([activations.max(axis=0), activations.mean(axis=0)])
