"""Pairwise additive masking over Z_{2^32} for secure summation.

Each unordered client pair (i, j), i < j, holds a 32-byte seed established
through a KEM handshake (lower id encapsulates to the higher id's public
key).  Per round the seed expands into a pseudorandom ring vector; the
lower-id client adds it, the higher-id client subtracts it, so the masks
cancel in the cohort sum and the server learns only the aggregate.

Masks are re-derived per round with the round number as a domain separator;
reusing one mask across rounds would leak differences of updates.

Mask expansion PRG (fixed wire construction):
    block_b = SHA-256(seed || round as 8-byte LE || b as 8-byte LE)
    each block yields 8 words, 4 consecutive bytes each, little-endian,
    for b = 0, 1, 2, ... until the requested length is reached.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .seeding import derive_bytes
from .vectors import EmptyInput, LengthMismatch


class MissingSeed(KeyError):
    """No pairwise seed is available for a required client pair."""


class RoundMismatch(ValueError):
    """Masked updates from different rounds cannot be aggregated."""


@dataclass(frozen=True)
class MaskedUpdate:
    client_id: int
    words: np.ndarray  # uint32, length m
    round_index: int


def pair_key(a: int, b: int) -> tuple[int, int]:
    if a == b:
        raise ValueError("a pair needs two distinct clients")
    return (a, b) if a < b else (b, a)


def expand_mask(seed: bytes, round_index: int, length: int) -> np.ndarray:
    """Expand a pairwise seed into ``length`` uniform ring words."""
    if len(seed) != 32:
        raise ValueError(f"pairwise seed must be 32 bytes, got {len(seed)}")
    if length < 1:
        raise ValueError("mask length must be >= 1")
    prefix = seed + int(round_index).to_bytes(8, "little")
    blocks = bytearray()
    for b in range((length + 7) // 8):
        blocks += hashlib.sha256(prefix + b.to_bytes(8, "little")).digest()
    return np.frombuffer(bytes(blocks), dtype="<u4")[:length].copy()


def establish_pairwise_seeds(clients, suite, seed: int) -> dict[tuple[int, int], bytes]:
    """Run the pairwise handshake for every client pair.

    ``clients`` is a list of (id, public_key, secret_key).  For each pair the
    lower id encapsulates to the higher id's public key; the higher id
    decapsulates.  Both sides must land on the same secret, which is stored
    once under the (low, high) key.  Encapsulation randomness derives from
    ``seed`` so a run is reproducible.
    """
    by_id = {cid: (pk, sk) for cid, pk, sk in clients}
    if len(by_id) != len(clients):
        raise ValueError("client ids must be distinct")
    table: dict[tuple[int, int], bytes] = {}
    ids = sorted(by_id)
    for a_pos, low in enumerate(ids):
        for high in ids[a_pos + 1 :]:
            randomness = derive_bytes("pairwise-encaps", seed, low, high)
            ct, sent = suite.encaps(by_id[high][0], randomness)
            received = suite.decaps(ct, by_id[high][1])
            if sent != received:
                raise ValueError(
                    f"handshake mismatch for pair ({low}, {high}); KEM broken"
                )
            table[(low, high)] = sent
    return table


def mask_update(
    quantized: np.ndarray,
    client_id: int,
    seeds: dict[tuple[int, int], bytes],
    cohort_ids,
    round_index: int,
) -> MaskedUpdate:
    """Add masks toward higher-id peers, subtract toward lower-id peers."""
    words = np.array(quantized, dtype=np.uint32, copy=True)
    m = words.size
    for peer in cohort_ids:
        if peer == client_id:
            continue
        key = pair_key(client_id, peer)
        try:
            seed = seeds[key]
        except KeyError:
            raise MissingSeed(f"no pairwise seed for {key}") from None
        mask = expand_mask(seed, round_index, m)
        if peer > client_id:
            words += mask
        else:
            words -= mask
    return MaskedUpdate(client_id=client_id, words=words, round_index=round_index)


def sum_masked(masked) -> np.ndarray:
    """Modular sum of masked updates, validating round and length agreement."""
    masked = list(masked)
    if not masked:
        raise EmptyInput("cannot aggregate zero masked updates")
    rounds = {mu.round_index for mu in masked}
    if len(rounds) != 1:
        raise RoundMismatch(f"mixed rounds in aggregate: {sorted(rounds)}")
    lengths = {mu.words.size for mu in masked}
    if len(lengths) != 1:
        raise LengthMismatch(f"mixed lengths in aggregate: {sorted(lengths)}")
    total = np.zeros(masked[0].words.size, dtype=np.uint32)
    for mu in sorted(masked, key=lambda m: m.client_id):
        total += mu.words
    return total


def unmask_aggregate(masked, scale: int, residual: np.ndarray | None = None) -> np.ndarray:
    """Sum masked updates, remove any dropout residual, and decode to reals."""
    from .vectors import dequantize

    masked = list(masked)
    total = sum_masked(masked)
    if residual is not None:
        residual = np.asarray(residual, dtype=np.uint32)
        if residual.size != total.size:
            raise LengthMismatch(
                f"residual length {residual.size} != aggregate length {total.size}"
            )
        total = total - residual
    return dequantize(total, scale, cohort_bound=len(masked) or 1)


def recover_dropout_residual(
    dropped_id: int,
    surviving_ids,
    recovered_seeds: dict[int, bytes],
    round_index: int,
    length: int,
) -> np.ndarray:
    """Uncancelled mask terms a dropped client left in the survivors' sum.

    For each surviving peer i the pair mask appears with sign +1 when i is
    below the dropped id (i added it, nobody subtracted) and -1 when i is
    above it (i subtracted it, nobody added).  ``recovered_seeds`` maps each
    surviving peer id to the reconstructed pairwise seed.
    """
    residual = np.zeros(length, dtype=np.uint32)
    for peer in surviving_ids:
        if peer == dropped_id:
            continue
        try:
            seed = recovered_seeds[peer]
        except KeyError:
            raise MissingSeed(
                f"no reconstructed seed for pair {pair_key(peer, dropped_id)}"
            ) from None
        mask = expand_mask(seed, round_index, length)
        if peer < dropped_id:
            residual += mask
        else:
            residual -= mask
    return residual


def combined_dropout_residual(
    dropped_ids,
    surviving_ids,
    seed_lookup,
    round_index: int,
    length: int,
) -> np.ndarray:
    """Total correction for several dropouts; pairs among dropped clients
    never entered the survivors' sum and are excluded by construction.

    ``seed_lookup(dropped_id, peer_id)`` must return the reconstructed
    32-byte pairwise seed.
    """
    survivors = [s for s in surviving_ids if s not in set(dropped_ids)]
    total = np.zeros(length, dtype=np.uint32)
    for dropped in sorted(dropped_ids):
        seeds = {peer: seed_lookup(dropped, peer) for peer in survivors}
        total += recover_dropout_residual(
            dropped, survivors, seeds, round_index, length
        )
    return total
