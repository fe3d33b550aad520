import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avibench.audio import AudioClip
from avibench.features.spectral import (LOG_MEL, FeatureError, FeatureFrames, Spectrogram, hann, inverse_mfcc,
                                        log_mel, mel_bank, mfcc, standardize, stft)

from conftest import SR, sine


def test_sine_at_bin_concentrates():
    n = 1024
    k = 40
    spec = stft(sine(k * SR / n, 0.5), n, 512)
    power = spec.frames ** 2
    # a Hann window spreads a bin-centred tone over bins k-1..k+1 only
    assert np.all(power[:, k - 1:k + 2].sum(axis=1) / power.sum(axis=1) >= 0.9)
    assert np.all(power.argmax(axis=1) == k)
    assert spec.frames.shape[1] == n // 2 + 1


def test_zero_clip_zero_spectrogram():
    spec = stft(AudioClip("z", np.zeros(4096)))
    assert not spec.frames.any()


def test_windowed_parseval(rng):
    n, hop = 512, 256
    x = rng.normal(size=4096)
    spec = stft(AudioClip("n", x), n, hop)
    w = hann(n)
    for i in range(spec.frames.shape[0]):
        seg = x[i * hop:i * hop + n] * w
        m2 = spec.frames[i] ** 2
        spectral = m2[0] + m2[-1] + 2 * m2[1:-1].sum()
        assert spectral == pytest.approx(n * np.sum(seg ** 2), rel=1e-6)


def test_stft_preconditions():
    with pytest.raises(FeatureError):
        stft(AudioClip("s", np.zeros(100)), 1024, 512)
    with pytest.raises(FeatureError):
        stft(AudioClip("s", np.zeros(4000)), 1000, 500)


def test_mel_bank_shape_invariants():
    bank = mel_bank(SR, 1024, 40, 50.0)
    w = bank.weights
    assert w.shape == (40, 513) and np.all(w >= 0)
    assert np.allclose(w.max(axis=1), 1.0, atol=0, rtol=0)
    assert np.all(np.diff(bank.center_freqs_hz) > 0)
    freqs = np.arange(513) * SR / 1024
    for row in w:
        nz = np.flatnonzero(row)
        assert freqs[nz].min() >= 50.0 - 1e-9 and freqs[nz].max() <= SR / 2
        peak = row.argmax()
        # unimodal: rising then falling
        assert np.all(np.diff(row[:peak + 1]) >= 0) and np.all(np.diff(row[peak:]) <= 0)


def _spec(mags):
    return Spectrogram(np.asarray(mags, dtype=float), 1024, 512, SR)


def test_log_mel_zero_is_log_floor():
    bank = mel_bank(SR, 1024)
    out = log_mel(_spec(np.zeros((3, 513))), bank, 1e-10)
    assert np.all(out.vectors == np.log(1e-10))


def test_log_mel_doubling_magnitudes_adds_log4(rng):
    bank = mel_bank(SR, 1024)
    mags = rng.uniform(10, 20, size=(4, 513))
    a = log_mel(_spec(mags), bank).vectors
    b = log_mel(_spec(2 * mags), bank).vectors
    assert np.allclose(b - a, np.log(4.0), atol=1e-9)


def test_log_mel_single_bin_support():
    bank = mel_bank(SR, 1024)
    mags = np.zeros((1, 513))
    mags[0, 100] = 5.0
    out = log_mel(_spec(mags), bank, 1e-10).vectors[0]
    above = out > np.log(1e-10) + 1e-6
    assert np.array_equal(above, bank.weights[:, 100] > 0)


def test_log_mel_dimension_mismatch():
    with pytest.raises(FeatureError):
        log_mel(Spectrogram(np.zeros((2, 257)), 512, 256, SR), mel_bank(SR, 1024))


def test_mfcc_of_constant_frame():
    c = mfcc(FeatureFrames(np.full((2, 40), 3.0), LOG_MEL), 13).vectors
    assert c[:, 0] == pytest.approx(3.0 * np.sqrt(40))
    assert np.all(np.abs(c[:, 1:]) < 1e-12)


def test_mfcc_inverse_identity(rng):
    x = rng.normal(size=(5, 40))
    c = mfcc(FeatureFrames(x, LOG_MEL), 40).vectors
    assert np.max(np.abs(inverse_mfcc(c, 40) - x)) < 1e-9


def test_mfcc_alternating_frame_highest_order():
    frame = np.array([(-1.0) ** i for i in range(40)])[None, :]
    c = mfcc(FeatureFrames(frame, LOG_MEL), 40).vectors[0]
    # hand evaluation of the DCT-II basis: (-1)^n correlates best with k = N - 1
    assert np.argmax(np.abs(c)) == 39
    assert c[39] ** 2 / np.sum(c ** 2) > 0.8


def test_mfcc_errors():
    with pytest.raises(FeatureError):
        mfcc(FeatureFrames(np.zeros((1, 10)), LOG_MEL), 13)


def test_mfcc_log_mel_deterministic():
    clip = sine(3000, 0.3)
    bank = mel_bank(SR, 1024)
    a = mfcc(log_mel(stft(clip), bank)).vectors
    b = mfcc(log_mel(stft(clip), bank)).vectors
    assert a.tobytes() == b.tobytes()


def test_standardize_train_and_constant_dim(rng):
    x = rng.normal(3, 2, size=(200, 4))
    x[:, 2] = 7.0
    z, stats = standardize(x)
    assert np.all(np.abs(z.mean(axis=0)) < 1e-9)
    assert np.all(z[:, 2] == 0)
    assert np.allclose(z[:, [0, 1, 3]].std(axis=0), 1.0)
    test, _ = standardize(rng.normal(3, 2, size=(10, 4)), stats)
    assert test.shape == (10, 4)


def test_standardize_not_idempotent(rng):
    x = rng.normal(5, 3, size=(100, 3))
    once, stats = standardize(x)
    twice, _ = standardize(once, stats)
    assert not np.allclose(once, twice)
    assert np.allclose(twice, (once - stats.mean) / stats.std)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stft_magnitudes_nonnegative(seed):
    x = np.random.default_rng(seed).uniform(-1, 1, 3000)
    assert np.all(stft(AudioClip("r", x), 256, 128).frames >= 0)
