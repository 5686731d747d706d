"""Flat parameter-vector arithmetic and the fixed-point ring encoding.

Model updates live in R^m as 1-D float64 arrays.  For secure summation they
are quantized into Z_q^m with q = 2**32, so that 4-byte words wrap natively
and modular addition is exact.  Negative values use the two's-complement
convention (x < 0 encodes as q + x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RING_MODULUS = 1 << 32
HALF_RING = 1 << 31


class LengthMismatch(ValueError):
    """Two vectors that must share a length do not."""


class EmptyInput(ValueError):
    """An aggregate was requested over zero vectors."""


class SaturationError(OverflowError):
    """A quantized value left the representable signed range [-q/2, q/2)."""


def as_vector(values) -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting NaN/Inf entries."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        v = v.reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("parameter vector contains non-finite entries")
    return v


@dataclass(frozen=True)
class QuantizationConfig:
    """Fixed-point encoding parameters.

    ``scale`` is the fixed-point scale factor (default one-millionth
    resolution); ``bound`` is the per-coordinate saturation limit the caller
    promises to respect.  ``validate`` enforces that a sum of ``max_cohort``
    encoded vectors cannot wrap past q/2.
    """

    scale: int = 10**6
    bound: float = 1.0

    def validate(self, max_cohort: int) -> None:
        if self.scale <= 0:
            raise ValueError("quantization scale must be positive")
        if self.bound <= 0:
            raise ValueError("quantization bound must be positive")
        if max_cohort * self.scale * self.bound >= HALF_RING:
            raise ValueError(
                f"quantization overflow risk: {max_cohort} * {self.scale} * "
                f"{self.bound} >= 2**31"
            )


def quantize(v, cfg: QuantizationConfig) -> np.ndarray:
    """Encode reals as ring words: round(scale * v), half away from zero.

    Raises SaturationError when any magnitude reaches q/2; that signals a
    misconfigured scale/bound pair, not a recoverable state.
    """
    v = as_vector(v)
    scaled = np.floor(np.abs(v) * cfg.scale + 0.5) * np.sign(v)
    if np.any(np.abs(scaled) >= HALF_RING):
        raise SaturationError(
            f"quantized magnitude >= 2**31 (max |value| = {np.max(np.abs(v)):g}, "
            f"scale = {cfg.scale})"
        )
    return (scaled.astype(np.int64) % RING_MODULUS).astype(np.uint32)


def dequantize(words: np.ndarray, scale: int, cohort_bound: int = 1) -> np.ndarray:
    """Decode ring words back to reals: centered lift, then divide by scale.

    ``cohort_bound`` states how many encoded vectors were summed into
    ``words``; the caller's QuantizationConfig.validate guarantees the lifted
    magnitude stays below q/2, so no error path exists here.
    """
    lifted = np.asarray(words, dtype=np.uint32).astype(np.int64)
    lifted[lifted >= HALF_RING] -= RING_MODULUS
    return lifted / float(scale)


def l2_norm(v) -> float:
    v = as_vector(v)
    return float(np.linalg.norm(v))


def cosine(a, b) -> float:
    """Cosine similarity in [-1, 1]; defined as 0 when either norm is 0.

    A zero vector carries no directional evidence, so it earns a neutral
    score rather than an error.
    """
    a = as_vector(a)
    b = as_vector(b)
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def trimmed_mean(updates, trim_fraction: float) -> np.ndarray:
    """Coordinate-wise trimmed mean.

    Per coordinate, drops the floor(trim_fraction * n) largest and smallest
    values and averages the rest.  Independent of the order of ``updates``.
    """
    if len(updates) == 0:
        raise EmptyInput("trimmed_mean of zero updates")
    if not 0.0 <= trim_fraction < 0.5:
        raise ValueError("trim fraction must be in [0, 0.5)")
    stack = np.stack([as_vector(u) for u in updates])
    n = stack.shape[0]
    k = int(np.floor(trim_fraction * n))
    ordered = np.sort(stack, axis=0)
    kept = ordered[k : n - k] if k > 0 else ordered
    return kept.mean(axis=0)
