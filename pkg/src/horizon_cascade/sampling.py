"""Class rebalancing for training rows: random oversampling, then undersampling to parity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateClassError
from .features import FeatureFrame


@dataclass(frozen=True)
class SamplerConfig:
    oversample_ratio: float = 0.8
    undersample_to_parity: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.oversample_ratio <= 1.0:
            raise ConfigError(f"oversample_ratio must be in (0, 1], got {self.oversample_ratio}")


def _classes(target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the minority and majority class (ties: label 1 is the minority)."""
    pos = np.flatnonzero(target == 1)
    neg = np.flatnonzero(target == 0)
    if pos.size == 0 or neg.size == 0:
        raise DegenerateClassError("resampling needs both classes in the training rows")
    if pos.size + neg.size != target.size:
        raise DegenerateClassError("training rows carry unknown labels")
    return (pos, neg) if pos.size <= neg.size else (neg, pos)


def oversample_indices(target: np.ndarray, ratio: float, rng: np.random.Generator) -> np.ndarray:
    """Original row order, then minority duplicates drawn with replacement."""
    minority, majority = _classes(target)
    goal = int(round(ratio * majority.size))
    extra = goal - minority.size
    base = np.arange(target.size)
    if extra <= 0:
        return base
    return np.concatenate([base, rng.choice(minority, size=extra, replace=True)])


def undersample_indices(target: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Majority rows subsampled without replacement to the minority count; order kept."""
    minority, majority = _classes(target)
    if minority.size == majority.size:
        return np.arange(target.size)
    kept = rng.choice(majority, size=minority.size, replace=False)
    return np.sort(np.concatenate([minority, kept]))


def random_oversample(frame: FeatureFrame, cfg: SamplerConfig) -> FeatureFrame:
    rng = np.random.default_rng(cfg.seed)
    return frame.take(oversample_indices(frame.target, cfg.oversample_ratio, rng))


def random_undersample(frame: FeatureFrame, cfg: SamplerConfig) -> FeatureFrame:
    rng = np.random.default_rng(cfg.seed)
    return frame.take(undersample_indices(frame.target, rng))


def resample_indices(target: np.ndarray, cfg: SamplerConfig) -> np.ndarray:
    """Row indices (with repeats) of the full oversample-then-undersample pipeline.

    Both steps draw from one generator seeded with ``cfg.seed``.
    """
    rng = np.random.default_rng(cfg.seed)
    idx = oversample_indices(target, cfg.oversample_ratio, rng)
    if cfg.undersample_to_parity:
        idx = idx[undersample_indices(target[idx], rng)]
    return idx


def resample(frame: FeatureFrame, cfg: SamplerConfig) -> FeatureFrame:
    return frame.take(resample_indices(frame.target, cfg))


def resample_weights(target: np.ndarray, cfg: SamplerConfig) -> np.ndarray:
    """Multiplicity of each original row after ``resample``.

    Fitting with these weights is equivalent to fitting on the duplicated rows.
    """
    return np.bincount(resample_indices(target, cfg), minlength=target.size).astype(np.float64)
