"""Bird audio detection benchmark: features, baseline detectors, evaluation and a challenge service."""

__version__ = "0.1.0"
