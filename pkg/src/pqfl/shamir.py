"""Threshold secret sharing over GF(2^61 - 1) for 32-byte secrets.

A secret is viewed as a 256-bit little-endian integer and split into five
52-bit chunks, each strictly below the Mersenne prime p = 2^61 - 1, so all
field arithmetic fits in native machine words.  Each chunk is shared with an
independent random polynomial of degree k - 1 evaluated at x = 1..n; any k
shares reconstruct via Lagrange interpolation at x = 0.

Wire encoding of one share: 2 bytes little-endian evaluation point x,
followed by five 8-byte little-endian field elements (42 bytes total).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PRIME = (1 << 61) - 1
CHUNK_BITS = 52
NUM_CHUNKS = 5
SHARE_BYTES = 2 + 8 * NUM_CHUNKS


class InsufficientShares(ValueError):
    """Fewer distinct shares than the threshold requires."""


class DuplicatePoint(ValueError):
    """Two shares claim the same evaluation point."""


@dataclass(frozen=True)
class ShamirConfig:
    participants: int
    max_dropouts: int

    @property
    def threshold(self) -> int:
        return self.participants - self.max_dropouts

    def validate(self) -> None:
        if self.participants < 1:
            raise ValueError("participants must be >= 1")
        if self.max_dropouts < 0:
            raise ValueError("max_dropouts must be >= 0")
        if not 1 <= self.threshold <= self.participants:
            raise ValueError(
                f"threshold {self.threshold} out of range for "
                f"{self.participants} participants"
            )


@dataclass(frozen=True)
class Share:
    x: int
    chunks: tuple[int, ...]

    def encode(self) -> bytes:
        out = self.x.to_bytes(2, "little")
        for c in self.chunks:
            out += c.to_bytes(8, "little")
        return out

    @classmethod
    def decode(cls, blob: bytes) -> "Share":
        if len(blob) != SHARE_BYTES:
            raise ValueError(f"share must be {SHARE_BYTES} bytes, got {len(blob)}")
        x = int.from_bytes(blob[:2], "little")
        chunks = tuple(
            int.from_bytes(blob[2 + 8 * i : 10 + 8 * i], "little")
            for i in range(NUM_CHUNKS)
        )
        return cls(x, chunks)


def _secret_to_chunks(secret: bytes) -> list[int]:
    if len(secret) != 32:
        raise ValueError(f"secret must be 32 bytes, got {len(secret)}")
    value = int.from_bytes(secret, "little")
    mask = (1 << CHUNK_BITS) - 1
    return [(value >> (CHUNK_BITS * i)) & mask for i in range(NUM_CHUNKS)]


def _chunks_to_secret(chunks) -> bytes:
    value = 0
    for i, c in enumerate(chunks):
        if not 0 <= c < (1 << CHUNK_BITS):
            raise ValueError("reconstructed chunk out of range; shares inconsistent")
        value |= c << (CHUNK_BITS * i)
    return value.to_bytes(32, "little")


def shamir_share(secret: bytes, cfg: ShamirConfig, seed: int) -> list[Share]:
    """Split a 32-byte secret into one share per participant (x = 1..n)."""
    cfg.validate()
    chunks = _secret_to_chunks(secret)
    rng = np.random.default_rng(seed)
    shares = []
    # coeffs[c][d]: chunk c's polynomial, degree d; constant term is the chunk
    coeffs = [
        [chunk] + [int(rng.integers(0, PRIME)) for _ in range(cfg.threshold - 1)]
        for chunk in chunks
    ]
    for x in range(1, cfg.participants + 1):
        vals = []
        for poly in coeffs:
            acc = 0
            for coef in reversed(poly):  # Horner
                acc = (acc * x + coef) % PRIME
            vals.append(acc)
        shares.append(Share(x, tuple(vals)))
    return shares


def shamir_reconstruct(shares, cfg: ShamirConfig) -> bytes:
    """Lagrange-interpolate each chunk at x = 0 and reassemble the secret."""
    cfg.validate()
    shares = list(shares)
    xs = [s.x for s in shares]
    if len(set(xs)) != len(xs):
        raise DuplicatePoint(f"duplicate evaluation points in {sorted(xs)}")
    if len(shares) < cfg.threshold:
        raise InsufficientShares(
            f"need {cfg.threshold} shares, got {len(shares)}"
        )
    use = shares[: cfg.threshold]
    chunks = [0] * NUM_CHUNKS
    for i, si in enumerate(use):
        num = 1
        den = 1
        for j, sj in enumerate(use):
            if i == j:
                continue
            num = (num * (-sj.x)) % PRIME
            den = (den * (si.x - sj.x)) % PRIME
        weight = num * pow(den, PRIME - 2, PRIME) % PRIME
        for c in range(NUM_CHUNKS):
            chunks[c] = (chunks[c] + si.chunks[c] * weight) % PRIME
    return _chunks_to_secret(chunks)
