"""Deterministic seed derivation.

Every random stream in a run is derived from the scenario's master seed plus
a structured label, so results are independent of scheduling and thread
count.  Derivation hashes length-prefixed parts to avoid collisions between
labels like ("ab", "c") and ("a", "bc").
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_bytes(*parts) -> bytes:
    """32 bytes determined by the ordered parts (ints, strs, or bytes)."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            blob = part
        elif isinstance(part, str):
            blob = part.encode("utf-8")
        elif isinstance(part, (int, np.integer)):
            blob = int(part).to_bytes(16, "little", signed=True)
        else:
            raise TypeError(f"cannot derive seed from {type(part).__name__}")
        h.update(len(blob).to_bytes(4, "little"))
        h.update(blob)
    return h.digest()


def derive_seed(*parts) -> int:
    """Unsigned 64-bit seed determined by the ordered parts."""
    return int.from_bytes(derive_bytes(*parts)[:8], "little")


def derived_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))


def counter_rng(*parts) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by the derived label.

    Used for noise streams that must be reproducible for a given
    (master seed, client, round) triple under any parallel schedule.
    """
    key = int.from_bytes(derive_bytes(*parts)[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))
