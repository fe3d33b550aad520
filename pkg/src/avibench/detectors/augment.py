"""Label-preserving audio augmentation: circular time shifts and noise mixing."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..audio import AudioClip

TIME_SHIFT = "time-shift"
NOISE_MIX = "noise-mix"
OPS = (TIME_SHIFT, NOISE_MIX)


def rms(x) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def time_shift(clip: AudioClip, n_samples: int) -> AudioClip:
    return replace(clip, samples=np.roll(clip.samples, int(n_samples)))


def noise_mix(clip: AudioClip, snr_db: float, rng) -> AudioClip:
    """Add white noise scaled so signal RMS / noise RMS equals `snr_db` exactly."""
    noise = np.random.default_rng(rng).standard_normal(clip.samples.size)
    sig = rms(clip.samples)
    if sig == 0.0:
        return clip
    noise *= sig * 10 ** (-snr_db / 20) / rms(noise)
    return replace(clip, samples=clip.samples + noise)


def augment(clips, labels, ops=OPS, factor: int = 2, snr_range_db=(10.0, 30.0), seed=0):
    """Return the originals followed by ``factor - 1`` augmented copies of each clip.

    Each copy applies one op drawn uniformly from `ops`; labels are carried over.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    ops = tuple(ops)
    unknown = set(ops) - set(OPS)
    if unknown or not ops:
        raise ValueError(f"unknown augmentation ops {sorted(unknown)}")
    lo, hi = snr_range_db
    if lo > hi:
        raise ValueError("snr_range_db must be ordered")
    clips, labels = list(clips), list(labels)
    if len(clips) != len(labels):
        raise ValueError("clips and labels differ in length")
    rng = np.random.default_rng(seed)
    out_clips, out_labels = list(clips), list(labels)
    for copy in range(1, factor):
        for clip, label in zip(clips, labels):
            op = ops[rng.integers(len(ops))]
            if op == TIME_SHIFT:
                new = time_shift(clip, rng.integers(clip.samples.size))
            else:
                new = noise_mix(clip, rng.uniform(lo, hi), rng.integers(2 ** 63))
            out_clips.append(replace(new, id=f"{clip.id}_aug{copy}"))
            out_labels.append(label)
    return out_clips, out_labels
