"""STFT, mel filterbanks, log-mel energies, MFCCs and standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct, idct

from ..audio import AudioClip

LOG_MEL = "log-mel"
MFCC = "mfcc"
LEARNED_L1 = "learned-layer1"
LEARNED_L2 = "learned-layer2"
KINDS = (LOG_MEL, MFCC, LEARNED_L1, LEARNED_L2)

VAR_FLOOR = 1e-8


class FeatureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Spectrogram:
    frames: np.ndarray  # [n_frames, n_bins] magnitudes
    frame_len: int
    hop: int
    sample_rate_hz: int

    @property
    def n_bins(self) -> int:
        return self.frame_len // 2 + 1

    def bin_freqs(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.sample_rate_hz / self.frame_len


@dataclass(frozen=True, eq=False)
class MelBank:
    weights: np.ndarray  # [n_mels, n_bins]
    center_freqs_hz: np.ndarray
    fmin_hz: float
    fmax_hz: float
    sample_rate_hz: int
    frame_len: int

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class FeatureFrames:
    vectors: np.ndarray  # [n_frames, dim]
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FeatureError(f"unknown feature kind {self.kind!r}")
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise FeatureError("feature vectors must be a 2-D matrix")
        if not np.all(np.isfinite(v)):
            raise FeatureError("feature vectors contain non-finite values")
        object.__setattr__(self, "vectors", v)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.vectors.shape[0]


def hann(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def stft(clip: AudioClip, frame_len: int = 1024, hop: int = 512, window: str = "hann") -> Spectrogram:
    if frame_len <= 0 or frame_len & (frame_len - 1):
        raise FeatureError(f"frame_len must be a power of two, got {frame_len}")
    if not 0 < hop <= frame_len:
        raise FeatureError("hop must be in (0, frame_len]")
    if window != "hann":
        raise FeatureError(f"unsupported window {window!r}")
    x = clip.samples
    if x.size < frame_len:
        raise FeatureError(f"clip {clip.id!r} is shorter than one frame ({x.size} < {frame_len})")
    n_frames = 1 + (x.size - frame_len) // hop
    frames = np.lib.stride_tricks.sliding_window_view(x, frame_len)[::hop][:n_frames]
    mags = np.abs(np.fft.rfft(frames * hann(frame_len), axis=1))
    return Spectrogram(mags, frame_len, hop, clip.sample_rate_hz)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_bank(sample_rate_hz: int, frame_len: int, n_mels: int = 40,
             fmin_hz: float = 50.0, fmax_hz: float | None = None) -> MelBank:
    """Triangular filters equally spaced on the mel scale, each scaled to peak 1."""
    nyquist = sample_rate_hz / 2
    fmax_hz = nyquist if fmax_hz is None else fmax_hz
    if not 0 <= fmin_hz < fmax_hz <= nyquist:
        raise FeatureError("need 0 <= fmin < fmax <= Nyquist")
    if n_mels < 1:
        raise FeatureError("n_mels must be positive")
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2))
    freqs = np.arange(frame_len // 2 + 1) * sample_rate_hz / frame_len
    weights = np.zeros((n_mels, freqs.size))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        tri = np.maximum(0.0, np.minimum(rising, falling))
        tri[(freqs < lo) | (freqs > hi)] = 0.0
        if tri.max() <= 0.0:
            # band narrower than one bin: take the bin nearest the centre
            tri[np.argmin(np.abs(freqs - mid))] = 1.0
        weights[m] = tri / tri.max()
    return MelBank(weights, edges[1:-1], float(fmin_hz), float(fmax_hz), sample_rate_hz, frame_len)


def log_mel(spec: Spectrogram, bank: MelBank, floor: float = 1e-10) -> FeatureFrames:
    """log(mel-band power + floor) per frame."""
    if bank.weights.shape[1] != spec.frames.shape[1]:
        raise FeatureError(f"mel bank has {bank.weights.shape[1]} bins, spectrogram {spec.frames.shape[1]}")
    power = spec.frames ** 2
    return FeatureFrames(np.log(power @ bank.weights.T + floor), LOG_MEL)


def mfcc(logmel: FeatureFrames, n_coeffs: int = 13) -> FeatureFrames:
    if logmel.kind != LOG_MEL:
        raise FeatureError(f"mfcc needs log-mel input, got {logmel.kind}")
    if not 0 < n_coeffs <= logmel.dim:
        raise FeatureError(f"n_coeffs={n_coeffs} exceeds n_mels={logmel.dim}")
    return FeatureFrames(dct(logmel.vectors, type=2, norm="ortho", axis=1)[:, :n_coeffs], MFCC)


def inverse_mfcc(coeffs: np.ndarray, n_mels: int) -> np.ndarray:
    """Inverse orthonormal DCT, zero-filling missing high-order coefficients."""
    full = np.zeros((coeffs.shape[0], n_mels))
    full[:, :coeffs.shape[1]] = coeffs
    return idct(full, type=2, norm="ortho", axis=1)


@dataclass(frozen=True, eq=False)
class StandardizeStats:
    mean: np.ndarray
    std: np.ndarray


def standardize(frames, stats: StandardizeStats | None = None):
    """Per-dimension z-scoring; pass the training `stats` back in for test data.

    Near-constant dimensions have their variance clamped to 1e-8.
    """
    x = frames.vectors if isinstance(frames, FeatureFrames) else np.asarray(frames, dtype=np.float64)
    if stats is None:
        var = x.var(axis=0)
        stats = StandardizeStats(x.mean(axis=0), np.sqrt(np.maximum(var, VAR_FLOOR)))
    out = (x - stats.mean) / stats.std
    if isinstance(frames, FeatureFrames):
        out = FeatureFrames(out, frames.kind)
    return out, stats
