from .adapt import AdaptationConfig, select_confident, self_adapt
from .augment import augment, noise_mix, time_shift
from .forest import RandomForest, rf_fit, rf_score
from .gmm import DiagGmm, GmmPair, gmm_fit, gmm_score
from .model import (DetectorModel, ForestDetector, GmmDetector, ModelError, check_feature_hash,
                    load_model, save_model)

__all__ = [
    "AdaptationConfig", "select_confident", "self_adapt",
    "augment", "noise_mix", "time_shift",
    "RandomForest", "rf_fit", "rf_score",
    "DiagGmm", "GmmPair", "gmm_fit", "gmm_score",
    "DetectorModel", "ForestDetector", "GmmDetector", "ModelError", "check_feature_hash",
    "load_model", "save_model",
]
