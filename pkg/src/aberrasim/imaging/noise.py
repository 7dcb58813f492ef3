"""Heteroscedastic Gaussian sensor noise: variance a * I + b."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class NoiseModel:
    a: float = 1e-3
    b: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValidationError("noise parameters a and b must be non-negative")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must fit in 64 unsigned bits")


def add_noise(img, model: NoiseModel) -> np.ndarray:
    """Add zero-mean Gaussian noise with per-pixel variance ``a * I + b`` and clamp to [0, 1].

    The variance uses the clean intensity, clipped at zero. The same seed
    always yields the same noise field.
    """
    x = np.asarray(img, dtype=float)
    if model.a == 0 and model.b == 0:
        return np.clip(x, 0.0, 1.0)
    rng = np.random.default_rng(int(model.seed))
    sigma = np.sqrt(model.a * np.clip(x, 0.0, None) + model.b)
    return np.clip(x + sigma * rng.standard_normal(x.shape), 0.0, 1.0)
