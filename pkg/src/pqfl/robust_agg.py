"""Server-side Byzantine-robust scoring, reputation, and aggregation.

Per round the server scores each received update by (a) cosine similarity
against the coordinate-wise trimmed mean of the round's updates and (b) its
norm relative to the cohort median.  Scores feed an exponential moving
average reputation per client; reputations weight the aggregate and drive
stratified cohort selection.  Round scores are clamped to [0, 1] so
reputations stay in [0, 1]: a negative similarity is maximally penalized.

Baseline aggregators (size-weighted mean, coordinate-wise median, and the
closest-to-majority selection rule) share this module so experiments can
swap them in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seeding import derived_rng
from .vectors import EmptyInput, as_vector, cosine, l2_norm, trimmed_mean


class TooFewClients(ValueError):
    pass


class AllZeroWeights(ValueError):
    """Every participant is fully distrusted; the round must abort."""


@dataclass(frozen=True)
class ReputationConfig:
    gamma: float = 0.9          # EMA weight on history
    trim_alpha: float = 0.2     # trim fraction per tail for the reference mean
    tau_low: float = 0.1        # normalized-magnitude acceptance band
    tau_high: float = 3.0
    penalty: float = 0.5        # similarity multiplier outside the band

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 <= self.trim_alpha < 0.5:
            raise ValueError("trim alpha must be in [0, 0.5)")
        if not 0.0 < self.tau_low < self.tau_high:
            raise ValueError("need 0 < tau_low < tau_high")
        if not 0.0 <= self.penalty <= 1.0:
            raise ValueError("penalty factor must be in [0, 1]")


@dataclass
class ClientRecord:
    client_id: int
    n_samples: int
    reputation: float = 1.0
    history: list = field(default_factory=list)  # (similarity, magnitude, score)


@dataclass(frozen=True)
class SelectionConfig:
    cohort_size: int = 20
    top_fraction: float = 0.7
    random_fraction: float = 0.3
    seed: int = 0

    def validate(self, n_clients: int) -> None:
        if self.cohort_size < 1 or self.cohort_size > n_clients:
            raise ValueError(
                f"cohort size {self.cohort_size} out of range for {n_clients} clients"
            )
        if abs(self.top_fraction + self.random_fraction - 1.0) > 1e-9:
            raise ValueError("top and random fractions must sum to 1")
        if not 0.0 <= self.top_fraction <= 1.0:
            raise ValueError("top fraction must be in [0, 1]")


@dataclass(frozen=True)
class RoundScore:
    client_id: int
    similarity: float
    magnitude: float
    score: float
    reputation: float  # value after this round's EMA step


def normalized_magnitude(update, all_norms) -> float:
    """Update norm over the cohort median norm; 1.0 when the median is 0."""
    all_norms = list(all_norms)
    if not all_norms:
        raise EmptyInput("normalized_magnitude needs at least one norm")
    med = float(np.median(all_norms))
    if med == 0.0:
        return 1.0
    return l2_norm(update) / med


def round_score(similarity: float, magnitude: float, cfg: ReputationConfig) -> float:
    """Similarity, halved outside the magnitude band, clamped to [0, 1]."""
    s = similarity
    if not cfg.tau_low <= magnitude <= cfg.tau_high:
        s *= cfg.penalty
    return float(np.clip(s, 0.0, 1.0))


def update_reputation(reputation: float, score: float, gamma: float) -> float:
    return gamma * reputation + (1.0 - gamma) * score


def adaptive_clip_threshold(all_norms) -> float:
    """Clipping threshold: twice the median update norm."""
    all_norms = list(all_norms)
    if not all_norms:
        raise EmptyInput("adaptive_clip_threshold needs at least one norm")
    return 2.0 * float(np.median(all_norms))


def clip_update(update, threshold: float) -> np.ndarray:
    """Scale the update down to norm ``threshold`` when it exceeds it."""
    if threshold < 0:
        raise ValueError("clip threshold must be >= 0")
    update = as_vector(update)
    norm = np.linalg.norm(update)
    if norm == 0.0:
        return update.copy()
    return update * min(1.0, threshold / norm)


def aggregate_weighted(updates, reputations, sizes) -> np.ndarray:
    """Reputation- and size-weighted average, summed in client order."""
    updates = [as_vector(u) for u in updates]
    if not updates:
        raise EmptyInput("cannot aggregate zero updates")
    if not len(updates) == len(reputations) == len(sizes):
        raise ValueError("updates, reputations, sizes must align")
    weights = [float(r) * float(n) for r, n in zip(reputations, sizes)]
    total = sum(weights)
    if total <= 0.0:
        raise AllZeroWeights("all reputation-size weights are zero")
    acc = np.zeros_like(updates[0])
    for w, u in zip(weights, updates):
        acc += w * u
    return acc / total


def score_round(updates, records, cfg: ReputationConfig) -> list[RoundScore]:
    """Score each participant against the trimmed-mean reference direction.

    ``updates`` are the round's received (clipped, noised) updates aligned
    with ``records``.  Returns per-client results including the post-round
    reputation; the caller decides whether to apply them.  Clients outside
    ``records`` are untouched by construction.
    """
    cfg.validate()
    updates = [as_vector(u) for u in updates]
    if len(updates) != len(records):
        raise ValueError("updates and records must align")
    if not updates:
        raise EmptyInput("cannot score an empty round")
    reference = trimmed_mean(updates, cfg.trim_alpha)
    norms = [l2_norm(u) for u in updates]
    results = []
    for update, record in zip(updates, records):
        sim = cosine(update, reference)
        mag = normalized_magnitude(update, norms)
        s = round_score(sim, mag, cfg)
        results.append(
            RoundScore(
                client_id=record.client_id,
                similarity=sim,
                magnitude=mag,
                score=s,
                reputation=update_reputation(record.reputation, s, cfg.gamma),
            )
        )
    return results


def apply_scores(records, scores) -> None:
    """Fold round scores into the client records (EMA already applied)."""
    by_id = {r.client_id: r for r in records}
    for rs in scores:
        rec = by_id[rs.client_id]
        rec.reputation = rs.reputation
        rec.history.append((rs.similarity, rs.magnitude, rs.score))


def select_clients(records, cfg: SelectionConfig, round_index: int) -> list[int]:
    """Stratified cohort: top reputations plus a seeded random remainder.

    Ties in reputation break toward the lower client id; the random stratum
    draws uniformly from the non-top clients with a round-derived seed.
    Returns sorted client ids.
    """
    records = list(records)
    cfg.validate(len(records))
    k_top = int(np.floor(cfg.top_fraction * cfg.cohort_size))
    k_rand = cfg.cohort_size - k_top
    ranked = sorted(records, key=lambda r: (-r.reputation, r.client_id))
    top_ids = [r.client_id for r in ranked[:k_top]]
    rest = [r.client_id for r in ranked[k_top:]]
    chosen = list(top_ids)
    if k_rand > 0:
        rng = derived_rng("cohort-selection", cfg.seed, round_index)
        picked = rng.choice(len(rest), size=min(k_rand, len(rest)), replace=False)
        chosen.extend(rest[int(i)] for i in picked)
    return sorted(chosen)


# -- baseline aggregators --


def fedavg_aggregate(updates, sizes) -> np.ndarray:
    """Plain size-weighted mean."""
    updates = [as_vector(u) for u in updates]
    if not updates:
        raise EmptyInput("cannot aggregate zero updates")
    if len(updates) != len(sizes):
        raise ValueError("updates and sizes must align")
    total = float(sum(sizes))
    if total <= 0:
        raise ValueError("total sample count must be positive")
    acc = np.zeros_like(updates[0])
    for n, u in zip(sizes, updates):
        acc += float(n) * u
    return acc / total


def median_aggregate(updates) -> np.ndarray:
    """Coordinate-wise median; even counts average the two central values."""
    updates = [as_vector(u) for u in updates]
    if not updates:
        raise EmptyInput("cannot aggregate zero updates")
    return np.median(np.stack(updates), axis=0)


def krum_aggregate(updates, byzantine_count: int) -> np.ndarray:
    """Return the update closest to its n - f - 2 nearest neighbors.

    Scores sum squared distances to the nearest n - f - 2 other updates;
    ties break toward the lower index.
    """
    updates = [as_vector(u) for u in updates]
    n = len(updates)
    if byzantine_count < 0:
        raise ValueError("byzantine count must be >= 0")
    if n < byzantine_count + 3:
        raise TooFewClients(
            f"selection rule needs n >= f + 3 (n={n}, f={byzantine_count})"
        )
    stack = np.stack(updates)
    sq = np.sum((stack[:, None, :] - stack[None, :, :]) ** 2, axis=-1)
    neighbors = n - byzantine_count - 2
    scores = []
    for i in range(n):
        others = np.sort(np.delete(sq[i], i))
        scores.append(float(np.sum(others[:neighbors])))
    best = int(np.argmin(scores))  # argmin takes the first (lowest id) on ties
    return updates[best].copy()
