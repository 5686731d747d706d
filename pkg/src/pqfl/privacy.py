"""Gaussian mechanism for per-round update privatization.

Noise scale follows the analytic Gaussian calibration
sigma = C * sqrt(2 * ln(1.25 / delta)) / epsilon for sensitivity C (the
round's clipping threshold).  Noise is added once per client per round,
after clipping and before quantization/masking.  No cross-round composition
accounting is performed; the run log reports total epsilon as untracked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import counter_rng
from .vectors import as_vector


class InvalidBudget(ValueError):
    """Privacy parameters outside their valid domain."""


@dataclass(frozen=True)
class DpConfig:
    epsilon: float = 2.0
    delta: float = 1e-5
    enabled: bool = False

    def validate(self) -> None:
        if self.epsilon <= 0:
            raise InvalidBudget(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise InvalidBudget(f"delta must be in (0, 1), got {self.delta}")


def calibrate_sigma(epsilon: float, delta: float, clip_bound: float) -> float:
    """Noise standard deviation for the Gaussian mechanism."""
    if epsilon <= 0:
        raise InvalidBudget(f"epsilon must be > 0, got {epsilon}")
    if not 0 < delta < 1:
        raise InvalidBudget(f"delta must be in (0, 1), got {delta}")
    if clip_bound < 0:
        raise InvalidBudget(f"clip bound must be >= 0, got {clip_bound}")
    return clip_bound * math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


def add_dp_noise(update, sigma: float, seed) -> np.ndarray:
    """Add i.i.d. Gaussian(0, sigma^2) noise, deterministic per seed.

    ``seed`` may be an int or a tuple of parts (e.g. (master, client, round))
    fed to the counter-based generator, so concurrent clients cannot perturb
    each other's streams.
    """
    update = as_vector(update)
    if sigma < 0:
        raise InvalidBudget(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return update.copy()
    parts = seed if isinstance(seed, tuple) else (seed,)
    rng = counter_rng("dp-noise", *parts)
    return update + rng.normal(0.0, sigma, size=update.size)
