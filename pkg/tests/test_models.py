import numpy as np
import pytest

from avibench.detectors.model import (ForestDetector, GmmDetector, ModelError, check_feature_hash, load_model,
                                      model_from_bytes, model_to_bytes, save_model)
from avibench.features.dictionary import DictionaryConfig

HASH = "ab" * 32


def _blocks(seed, n=24, frames=30, dim=13, shift=1.0):
    r = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    blocks = [r.normal(size=(frames, dim)) + shift * l for l in labels]
    return blocks, labels.tolist()


@pytest.fixture(scope="module")
def gmm_model():
    blocks, labels = _blocks(0)
    return GmmDetector.fit(blocks, labels, n_components=2, seed=3, feature_hash=HASH)


@pytest.fixture(scope="module")
def forest_model():
    blocks, labels = _blocks(1, dim=8, shift=0.8)
    cfg = DictionaryConfig(patch_width=2, k1=6, k2=4, max_iter=20, seed=2)
    return ForestDetector.fit(blocks, labels, dict_config=cfg, n_trees=10, seed=4, feature_hash=HASH)


@pytest.mark.parametrize("name", ["gmm_model", "forest_model"])
def test_roundtrip_bit_identical_scores(name, request, tmp_path):
    model = request.getfixturevalue(name)
    dim = 13 if name == "gmm_model" else 8
    test, _ = _blocks(9, n=10, dim=dim)
    back = load_model(save_model(model, tmp_path / "m.avmd"))
    assert back.variant == model.variant and back.feature_hash == HASH
    assert model.score(test).tobytes() == back.score(test).tobytes()
    assert model_to_bytes(back) == model_to_bytes(model)
    s = model.score(test)
    assert np.all(np.isfinite(s)) and np.all((0 <= s) & (s <= 1))


def test_file_header(gmm_model):
    raw = model_to_bytes(gmm_model)
    assert raw[:4] == b"AVMD"
    assert raw[6] == 1 and raw[8:40] == bytes.fromhex(HASH)


def test_hash_mismatch_refused(gmm_model):
    check_feature_hash(gmm_model, HASH)
    with pytest.raises(ModelError, match="mismatch"):
        check_feature_hash(gmm_model, "cd" * 32)


def test_bad_container():
    with pytest.raises(ModelError):
        model_from_bytes(b"AVMD")
    with pytest.raises(ModelError, match="magic"):
        model_from_bytes(b"XXXX" + bytes(60))


def test_gmm_detector_needs_both_classes():
    blocks, _ = _blocks(0, n=4)
    with pytest.raises(ModelError):
        GmmDetector.fit(blocks, [1, 1, 1, 1], n_components=2)
    with pytest.raises(ModelError):
        GmmDetector.fit(blocks, [1, 0], n_components=2)


def test_gmm_detector_separates_training_data(gmm_model):
    blocks, labels = _blocks(0)
    s = gmm_model.score(blocks)
    assert s[np.array(labels) == 1].mean() > s[np.array(labels) == 0].mean()
