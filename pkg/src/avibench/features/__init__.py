from .cache import FeatureCache, load_cache, save_cache
from .dictionary import (DictionaryConfig, FeatureDictionary, encode_pool, learn_dictionary,
                         spherical_kmeans)
from .spectral import (LOG_MEL, MFCC, FeatureError, FeatureFrames, MelBank, Spectrogram,
                       StandardizeStats, log_mel, mel_bank, mfcc, standardize, stft)

__all__ = [
    "FeatureCache", "load_cache", "save_cache",
    "DictionaryConfig", "FeatureDictionary", "encode_pool", "learn_dictionary", "spherical_kmeans",
    "LOG_MEL", "MFCC", "FeatureError", "FeatureFrames", "MelBank", "Spectrogram",
    "StandardizeStats", "log_mel", "mel_bank", "mfcc", "standardize", "stft",
]
