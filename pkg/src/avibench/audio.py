"""Reading, normalizing and segmenting mono PCM audio."""

from __future__ import annotations

import wave
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

PCM_SCALE = 32768.0
QUANT_STEP = 1.0 / PCM_SCALE
CANONICAL_RATE = 44100


class AudioError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AudioClip:
    id: str
    samples: np.ndarray
    sample_rate_hz: int = CANONICAL_RATE
    source: str | None = None
    silent: bool = False

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise AudioError(f"clip {self.id!r}: samples must be a non-empty 1-D buffer")
        if self.sample_rate_hz <= 0:
            raise AudioError(f"clip {self.id!r}: sample rate must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def peak(self) -> float:
        return float(np.max(np.abs(self.samples)))


def read_wav(path, downmix: bool = False) -> AudioClip:
    """Load a 16-bit integer PCM WAV file; amplitudes are value / 32768."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as w:
            n_channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise AudioError(f"{path}: not-a-wav ({exc})") from exc
    if width != 2:
        raise AudioError(f"{path}: unsupported bit depth {8 * width}")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    if n_channels > 1:
        if not downmix:
            raise AudioError(f"{path}: multi-channel ({n_channels} channels); pass downmix=True")
        data = data.reshape(-1, n_channels).mean(axis=1)
    return AudioClip(path.stem, data, rate, source=str(path))


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    q = np.round(np.asarray(samples, dtype=np.float64) * PCM_SCALE)
    return np.clip(q, -32768, 32767).astype("<i2")


def write_wav(clip: AudioClip, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(clip.sample_rate_hz))
        w.writeframes(to_pcm16(clip.samples).tobytes())
    return path


def normalize_peak(clip: AudioClip, headroom_db: float = 2.0) -> AudioClip:
    """Scale so the peak sits `headroom_db` below full scale (sox ``gain -n -2``).

    All-zero clips are returned unchanged with ``silent=True``.
    """
    peak = clip.peak()
    if peak == 0.0:
        return replace(clip, silent=True)
    target = 10.0 ** (-headroom_db / 20.0)
    scale = target / peak
    # a subnormal peak overflows the scale; dividing first stays finite
    samples = clip.samples * scale if np.isfinite(scale) else clip.samples / peak * target
    return replace(clip, samples=samples, silent=False)


def segment_count(n_samples: int, seg_len: int) -> int:
    full, rem = divmod(n_samples, seg_len)
    return full + (1 if 2 * rem >= seg_len and rem > 0 else 0)


def segment(clip: AudioClip, clip_len_s: float) -> list[AudioClip]:
    """Cut into consecutive non-overlapping clips of `clip_len_s` seconds.

    A trailing remainder of at least half a clip is zero-padded and kept;
    shorter remainders are dropped.
    """
    if clip_len_s <= 0:
        raise AudioError("clip_len_s must be positive")
    seg_len = int(round(clip_len_s * clip.sample_rate_hz))
    if seg_len <= 0:
        raise AudioError("clip_len_s is shorter than one sample")
    count = segment_count(clip.samples.size, seg_len)
    width = max(3, len(str(count - 1))) if count else 3
    out = []
    for i in range(count):
        chunk = clip.samples[i * seg_len:(i + 1) * seg_len]
        if chunk.size < seg_len:
            chunk = np.concatenate([chunk, np.zeros(seg_len - chunk.size)])
        out.append(AudioClip(f"{clip.id}_{i:0{width}d}", chunk, clip.sample_rate_hz,
                             source=clip.source))
    return out
