"""Deterministic synthetic soundscapes with per-site acoustic profiles.

A clip is coloured background noise plus a handful of events. Bird events
(frequency-swept chirps and very short "chink" calls) appear only in positive
clips; distractors (rain, insects, speech-like babble) appear in both
classes. Every event is scaled so its RMS over its own span sits at a drawn
SNR relative to the background over the same span.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import butter, fftconvolve, sosfilt

from .audio import AudioClip, normalize_peak, write_wav
from .manifest import DatasetManifest, ManifestItem, write_manifest

BIRD_KINDS = ("chirp", "chink")
DISTRACTOR_KINDS = ("rain", "insect", "speech-like")
EVENT_KINDS = BIRD_KINDS + DISTRACTOR_KINDS
CHINK_MAX_S = 0.03


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SiteProfile:
    name: str
    noise_color: str = "pink"  # white | pink
    noise_level_dbfs: float = -40.0  # background RMS before normalization
    event_mix: dict = field(default_factory=lambda: {
        "chirp": 0.35, "chink": 0.15, "rain": 0.15, "insect": 0.1, "speech-like": 0.25})
    positive_rate: float = 0.5
    snr_range_db: tuple = (-6.0, 6.0)  # bird events
    reverb_tail_s: float = 0.0
    distractor_rate: float = 1.0  # mean number of distractors per clip
    distractor_snr_db: tuple = (-6.0, 6.0)
    max_bird_events: int = 3
    gust_rate_hz: float = 0.0  # slow amplitude modulation of the background (wind)
    bird_band_hz: tuple = (2000.0, 8000.0)
    insect_band_hz: tuple = (3000.0, 9000.0)

    def __post_init__(self):
        if self.noise_color not in ("white", "pink"):
            raise SynthError(f"noise colour must be white or pink, got {self.noise_color!r}")
        if set(self.event_mix) - set(EVENT_KINDS):
            raise SynthError(f"unknown event kinds {sorted(set(self.event_mix) - set(EVENT_KINDS))}")
        w = np.array(list(self.event_mix.values()), dtype=np.float64)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise SynthError("event mix weights must be non-negative and sum to 1")
        if not any(self.event_mix.get(k, 0) > 0 for k in BIRD_KINDS):
            raise SynthError("event mix needs a bird kind")
        if not 0.0 <= self.positive_rate <= 1.0:
            raise SynthError("positive rate must be in [0, 1]")
        for lo, hi in (self.snr_range_db, self.distractor_snr_db):
            if lo > hi:
                raise SynthError("SNR ranges must be ordered")

    def kind_weights(self, kinds) -> np.ndarray:
        w = np.array([self.event_mix.get(k, 0.0) for k in kinds], dtype=np.float64)
        return w / w.sum() if w.sum() > 0 else w

    def to_dict(self):
        d = asdict(self)
        d["snr_range_db"] = list(self.snr_range_db)
        d["distractor_snr_db"] = list(self.distractor_snr_db)
        d["bird_band_hz"] = list(self.bird_band_hz)
        d["insect_band_hz"] = list(self.insect_band_hz)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("snr_range_db", "distractor_snr_db", "bird_band_hz", "insect_band_hz"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


SITE_A = SiteProfile("siteA")
SITE_B = SiteProfile(
    "siteB", noise_color="pink", noise_level_dbfs=-25.0, gust_rate_hz=0.7, reverb_tail_s=0.15,
    bird_band_hz=(1500.0, 6000.0))
PROFILES = {"siteA": SITE_A, "siteB": SITE_B}


@dataclass(frozen=True)
class EventSpec:
    kind: str
    onset_s: float
    duration_s: float
    snr_db: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise SynthError(f"unknown event kind {self.kind!r}")
        if not self.duration_s > 0:
            raise SynthError("event duration must be positive")
        if self.onset_s < 0:
            raise SynthError("event onset must be non-negative")

    @property
    def is_bird(self) -> bool:
        return self.kind in BIRD_KINDS

    def to_dict(self):
        return {"kind": self.kind, "onset_s": self.onset_s, "duration_s": self.duration_s,
                "snr_db": self.snr_db, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d["onset_s"], d["duration_s"], d["snr_db"], dict(d.get("params", {})))


def _raised_cosine(n: int, ramp: int) -> np.ndarray:
    env = np.ones(n)
    ramp = min(ramp, n // 2)
    if ramp > 0:
        r = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = r
        env[n - ramp:] = r[::-1]
    return env


def _bandpass(x, lo, hi, sr, order=4):
    nyq = sr / 2
    lo, hi = max(lo, 20.0), min(hi, 0.98 * nyq)
    if lo >= hi:
        raise SynthError(f"empty pass band {lo}-{hi} Hz")
    return sosfilt(butter(order, [lo / nyq, hi / nyq], btype="band", output="sos"), x)


def synth_event(spec: EventSpec, sample_rate: int) -> np.ndarray:
    """Unscaled event waveform; identical bytes for identical (spec, rate)."""
    n = int(round(spec.duration_s * sample_rate))
    if n < 1:
        raise SynthError("event shorter than one sample")
    p = spec.params
    t = np.arange(n) / sample_rate
    nyq = sample_rate / 2
    if spec.kind == "chirp":
        f0, f1 = p.get("start_hz", 2000.0), p.get("end_hz", 4000.0)
        if not (0 < f0 < nyq and 0 < f1 < nyq):
            raise SynthError("chirp frequencies must lie in (0, Nyquist)")
        freq = f0 + (f1 - f0) * t / spec.duration_s
        phase = 2 * np.pi * np.cumsum(freq) / sample_rate
        # raised-cosine (Hann) envelope over the whole call
        return np.sin(phase) * (0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / max(n - 1, 1)))
    if spec.kind == "chink":
        if spec.duration_s >= CHINK_MAX_S:
            raise SynthError(f"chink must be shorter than {CHINK_MAX_S * 1000:.0f} ms")
        fc = p.get("center_hz", 5000.0)
        if not 0 < fc < nyq:
            raise SynthError("chink centre frequency must lie in (0, Nyquist)")
        # impulse response of a resonant band-pass: a damped sinusoid
        decay = spec.duration_s / 5
        return np.sin(2 * np.pi * fc * t) * np.exp(-t / decay) * _raised_cosine(n, int(0.001 * sample_rate))
    rng = np.random.default_rng(int(p.get("seed", 0)))
    if spec.kind == "rain":
        density = p.get("drops_per_s", 20.0)
        if density <= 0:
            raise SynthError("drop density must be positive")
        out = np.zeros(n)
        n_drops = max(1, rng.poisson(density * spec.duration_s))
        drop_len = max(8, int(0.004 * sample_rate))
        tt = np.arange(drop_len) / sample_rate
        for _ in range(n_drops):
            at = rng.integers(0, max(1, n - drop_len))
            burst = rng.standard_normal(drop_len) * np.exp(-tt / 0.0008) * rng.uniform(0.3, 1.0)
            out[at:at + drop_len] += burst
        return _bandpass(out, 1000.0, 0.9 * nyq, sample_rate, order=2)
    if spec.kind == "insect":
        fc, am = p.get("carrier_hz", 6000.0), p.get("am_rate_hz", 40.0)
        if not 0 < fc < nyq or am <= 0:
            raise SynthError("insect carrier must lie in (0, Nyquist) and AM rate be positive")
        carrier = _bandpass(rng.standard_normal(n), 0.9 * fc, 1.1 * fc, sample_rate, order=2)
        gate = (0.5 + 0.5 * np.sin(2 * np.pi * am * t)) ** 4
        return carrier * gate * _raised_cosine(n, int(0.02 * sample_rate))
    # speech-like: glottal pulse train through one formant, syllabic modulation
    f0, formant = p.get("f0_hz", 150.0), p.get("formant_hz", 700.0)
    if not 0 < formant < nyq or f0 <= 0:
        raise SynthError("speech-like parameters out of range")
    f0_track = f0 * (1 + 0.1 * np.sin(2 * np.pi * 1.3 * t))
    pulses = np.sign(np.sin(2 * np.pi * np.cumsum(f0_track) / sample_rate)) + 0.1 * rng.standard_normal(n)
    voiced = _bandpass(pulses, 0.6 * formant, 1.6 * formant, sample_rate, order=2)
    syllables = np.clip(np.sin(2 * np.pi * p.get("syllable_hz", 4.0) * t), 0, None)
    return voiced * syllables * _raised_cosine(n, int(0.02 * sample_rate))


def background_noise(n: int, color: str, rng, sample_rate: int, gust_rate_hz: float = 0.0) -> np.ndarray:
    """Unit-RMS white or pink (1/f power) noise, optionally with slow gusting."""
    white = rng.standard_normal(n)
    if color == "pink":
        spec = np.fft.rfft(white)
        f = np.arange(spec.size)
        f[0] = 1
        white = np.fft.irfft(spec / np.sqrt(f), n)
    if gust_rate_hz > 0:
        t = np.arange(n) / sample_rate
        white = white * (1.0 + 0.6 * np.sin(2 * np.pi * gust_rate_hz * t + rng.uniform(0, 2 * np.pi)))
    return white / np.sqrt(np.mean(white ** 2))


def reverb(x: np.ndarray, tail_s: float, rng, sample_rate: int) -> np.ndarray:
    """Dry signal plus exponentially decaying noise tail (60 dB down after `tail_s`)."""
    if tail_s <= 0:
        return x
    m = int(tail_s * sample_rate)
    t = np.arange(m) / sample_rate
    ir = rng.standard_normal(m) * np.exp(-6.9 * t / tail_s) * 0.3
    ir[0] = 1.0
    return fftconvolve(x, ir)


def _draw_event(kind, snr_db, clip_len_s, profile: SiteProfile, rng) -> EventSpec:
    lo_band, hi_band = profile.bird_band_hz
    if kind == "chirp":
        dur = rng.uniform(min(0.08, clip_len_s), min(0.4, clip_len_s))
        a, b = rng.uniform(lo_band, hi_band, 2)
        params = {"start_hz": float(a), "end_hz": float(b)}
    elif kind == "chink":
        dur = rng.uniform(0.008, 0.025)
        params = {"center_hz": float(rng.uniform(lo_band, hi_band))}
    elif kind == "rain":
        dur = rng.uniform(min(0.5, clip_len_s), clip_len_s)
        params = {"drops_per_s": float(rng.uniform(5, 40)), "seed": int(rng.integers(2 ** 31))}
    elif kind == "insect":
        dur = rng.uniform(min(0.3, clip_len_s), clip_len_s)
        params = {"carrier_hz": float(rng.uniform(*profile.insect_band_hz)), "am_rate_hz": float(rng.uniform(20, 80)),
                  "seed": int(rng.integers(2 ** 31))}
    else:
        dur = rng.uniform(min(0.4, clip_len_s), min(1.5, clip_len_s))
        params = {"f0_hz": float(rng.uniform(100, 240)), "formant_hz": float(rng.uniform(500, 1500)),
                  "syllable_hz": float(rng.uniform(3, 6)), "seed": int(rng.integers(2 ** 31))}
    dur = min(dur, clip_len_s)
    onset = rng.uniform(0, clip_len_s - dur)
    return EventSpec(kind, float(onset), float(dur), float(snr_db), params)


@dataclass
class Scene:
    background: np.ndarray
    events: list  # (EventSpec, full-length scaled buffer, (start, stop))
    sample_rate: int

    def mix(self) -> np.ndarray:
        out = self.background.copy()
        for _, buf, _ in self.events:
            out += buf
        return out


def render_scene(profile: SiteProfile, has_bird: bool, clip_len_s: float, seed,
                 sample_rate: int = 44100) -> Scene:
    rng = np.random.default_rng(seed)
    n = int(round(clip_len_s * sample_rate))
    level = 10 ** (profile.noise_level_dbfs / 20)
    bg = level * background_noise(n, profile.noise_color, rng, sample_rate, profile.gust_rate_hz)

    specs = []
    if has_bird:
        kinds = [k for k in BIRD_KINDS]
        for _ in range(rng.integers(1, profile.max_bird_events + 1)):
            kind = kinds[rng.choice(len(kinds), p=profile.kind_weights(kinds))]
            specs.append(_draw_event(kind, rng.uniform(*profile.snr_range_db), clip_len_s, profile, rng))
    dw = profile.kind_weights(DISTRACTOR_KINDS)
    if dw.sum() > 0:
        for _ in range(rng.poisson(profile.distractor_rate)):
            kind = DISTRACTOR_KINDS[rng.choice(len(DISTRACTOR_KINDS), p=dw)]
            specs.append(_draw_event(kind, rng.uniform(*profile.distractor_snr_db), clip_len_s, profile, rng))

    events = []
    for spec in specs:
        wave = synth_event(spec, sample_rate)
        if profile.reverb_tail_s > 0:
            wave = reverb(wave, profile.reverb_tail_s, np.random.default_rng(rng.integers(2 ** 63)), sample_rate)
        start = int(round(spec.onset_s * sample_rate))
        wave = wave[:n - start]
        span = bg[start:start + wave.size]
        ev_rms = np.sqrt(np.mean(wave ** 2))
        if ev_rms == 0:
            continue
        gain = 10 ** (spec.snr_db / 20) * np.sqrt(np.mean(span ** 2)) / ev_rms
        buf = np.zeros(n)
        buf[start:start + wave.size] = gain * wave
        events.append((spec, buf, (start, start + wave.size)))
    return Scene(bg, events, sample_rate)


def measured_snr_db(scene: Scene, index: int) -> float:
    """Event RMS over its span relative to the background over the same span."""
    _, buf, (start, stop) = scene.events[index]
    span = slice(start, stop)
    return float(20 * np.log10(np.sqrt(np.mean(buf[span] ** 2)) / np.sqrt(np.mean(scene.background[span] ** 2))))


def synth_clip(profile: SiteProfile, has_bird: bool, clip_len_s: float, seed, item_id: str = "clip",
               sample_rate: int = 44100, normalize: bool = True):
    """Render one labelled clip; returns (AudioClip, label, event specs).

    The mix is peak-normalized to -2 dBFS by default (ratios between
    components are unaffected) and rounded to the 16-bit grid, so writing it
    to WAV and reading it back is lossless.
    """
    scene = render_scene(profile, has_bird, clip_len_s, seed, sample_rate)
    clip = AudioClip(item_id, scene.mix(), sample_rate)
    if normalize:
        clip = normalize_peak(clip)
    elif clip.peak() > 0.99:
        clip = AudioClip(item_id, clip.samples * (0.99 / clip.peak()), sample_rate)
    samples = np.round(clip.samples * 32768.0) / 32768.0
    clip = AudioClip(item_id, samples, sample_rate)
    return clip, int(has_bird), [spec for spec, _, _ in scene.events]


def item_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(index)])


def positive_mask(n_items: int, positive_rate: float, seed: int) -> np.ndarray:
    n_pos = int(round(n_items * positive_rate))
    mask = np.zeros(n_items, dtype=bool)
    mask[np.random.default_rng([int(seed), 2 ** 32 - 1]).permutation(n_items)[:n_pos]] = True
    return mask


def synth_items(profile: SiteProfile, n_items: int, clip_len_s: float, seed: int, sample_rate: int = 44100,
                id_prefix: str | None = None):
    """Yield (item_id, clip, label, events) for every item, in id order."""
    mask = positive_mask(n_items, profile.positive_rate, seed)
    prefix = id_prefix if id_prefix is not None else profile.name
    width = max(5, len(str(n_items - 1)))
    for i in range(n_items):
        item_id = f"{prefix}_{i:0{width}d}"
        clip, label, events = synth_clip(profile, bool(mask[i]), clip_len_s, item_seed(seed, i), item_id,
                                         sample_rate)
        yield item_id, clip, label, events


def generate_dataset(profile: SiteProfile, n_items: int, clip_len_s: float, seed: int, out_dir,
                     sample_rate: int = 44100) -> DatasetManifest:
    """Write WAVs, ``manifest.csv`` and the ``events.json`` sidecar under `out_dir`."""
    out = Path(out_dir)
    try:
        (out / "audio").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SynthError(f"cannot write to {out}: {exc}") from exc
    items, log = [], {}
    for item_id, clip, label, events in synth_items(profile, n_items, clip_len_s, seed, sample_rate):
        rel = f"audio/{item_id}.wav"
        write_wav(clip, out / rel)
        items.append(ManifestItem(item_id, label, profile.name, rel))
        log[item_id] = [e.to_dict() for e in events]
    manifest = DatasetManifest(items, out)
    write_manifest(manifest, out / "manifest.csv")
    (out / "events.json").write_text(
        json.dumps({"profile": profile.to_dict(), "seed": seed, "clip_len_s": clip_len_s,
                    "sample_rate": sample_rate, "events": log}, indent=1, sort_keys=True) + "\n",
        encoding="utf-8")
    return manifest
