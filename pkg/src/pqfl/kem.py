"""Key-encapsulation suites used for pairwise seed establishment.

Two interchangeable suites:

* ``MLKEM1024`` — the post-quantum production suite (see ``mlkem``).
* ``MockKEM`` — a deterministic hash-based stand-in with no security, kept so
  the full protocol runs bit-reproducibly and fast in tests and simulations.

MockKEM wire construction (fixed; do not change without updating tests):
    sk = 32 seed bytes
    pk = SHA-256("mockkem-pk" || sk)
    encaps with 32-byte randomness r:
        ct = SHA-256("mockkem-ct" || pk || r)
        ss = SHA-256("mockkem-ss" || pk || ct)
    decaps: recompute pk from sk, then ss from (pk, ct)
"""

from __future__ import annotations

import hashlib
import os

from . import mlkem


class DecapsFailure(ValueError):
    """Decapsulation rejected a malformed input."""


class MockKEM:
    name = "MockKEM"
    pk_bytes = 32
    ct_bytes = 32
    ss_bytes = 32

    @staticmethod
    def _expand(seed) -> bytes:
        if seed is None:
            return os.urandom(32)
        if isinstance(seed, int):
            return hashlib.sha256(
                b"mockkem-seed" + seed.to_bytes(16, "little", signed=True)
            ).digest()
        if isinstance(seed, bytes) and len(seed) == 32:
            return seed
        raise ValueError("seed must be None, an int, or 32 bytes")

    @classmethod
    def keygen(cls, seed=None) -> tuple[bytes, bytes]:
        sk = cls._expand(seed)
        pk = hashlib.sha256(b"mockkem-pk" + sk).digest()
        return pk, sk

    @classmethod
    def encaps(cls, pk: bytes, randomness: bytes | None = None) -> tuple[bytes, bytes]:
        if len(pk) != cls.pk_bytes:
            raise ValueError(f"public key must be {cls.pk_bytes} bytes")
        r = os.urandom(32) if randomness is None else randomness
        if len(r) != 32:
            raise ValueError("encapsulation randomness must be 32 bytes")
        ct = hashlib.sha256(b"mockkem-ct" + pk + r).digest()
        ss = hashlib.sha256(b"mockkem-ss" + pk + ct).digest()
        return ct, ss

    @classmethod
    def decaps(cls, ct: bytes, sk: bytes) -> bytes:
        if len(ct) != cls.ct_bytes:
            raise DecapsFailure(f"ciphertext must be {cls.ct_bytes} bytes, got {len(ct)}")
        if len(sk) != 32:
            raise DecapsFailure("secret key must be 32 bytes")
        pk = hashlib.sha256(b"mockkem-pk" + sk).digest()
        return hashlib.sha256(b"mockkem-ss" + pk + ct).digest()


class MLKEM1024:
    name = "ML-KEM-1024"
    pk_bytes = mlkem.EK_BYTES
    ct_bytes = mlkem.CT_BYTES
    ss_bytes = mlkem.SS_BYTES

    @staticmethod
    def keygen(seed=None) -> tuple[bytes, bytes]:
        return mlkem.keygen(seed)

    @staticmethod
    def encaps(pk: bytes, randomness: bytes | None = None) -> tuple[bytes, bytes]:
        return mlkem.encaps(pk, randomness)

    @staticmethod
    def decaps(ct: bytes, sk: bytes) -> bytes:
        try:
            return mlkem.decaps(sk, ct)
        except ValueError as exc:
            raise DecapsFailure(str(exc)) from exc


SUITES = {
    "mock": MockKEM,
    "mockkem": MockKEM,
    "ml-kem-1024": MLKEM1024,
    "kyber1024": MLKEM1024,
}


def get_suite(name: str):
    try:
        return SUITES[name.strip().lower()]
    except KeyError:
        raise ValueError(
            f"unknown KEM suite {name!r}; expected one of {sorted(set(SUITES))}"
        ) from None
