"""Byzantine client behaviors injected into the simulation.

Update-space attacks transform the honest local update after training
(gradient_flip, sign_flip, gaussian_noise, adaptive alternation); label_flip
poisons the local training data instead and leaves updates untouched here.
Corrupted clients still follow the wire protocol: clipping, noise,
quantization and masking are applied to the corrupted update downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import counter_rng, derived_rng
from .vectors import as_vector

ATTACK_KINDS = (
    "none",
    "gradient_flip",
    "sign_flip",
    "label_flip",
    "gaussian_noise",
    "adaptive",
)


@dataclass(frozen=True)
class AttackPlan:
    kind: str = "none"
    fraction: float = 0.0          # Byzantine fraction of the population
    start_round: int = 0
    flip_scale: float = 1.0
    noise_sigma: float = 1.0
    label_fraction: float = 1.0
    adaptive_on: int = 10          # rounds of attack per cycle
    adaptive_off: int = 10         # rounds of honest behavior per cycle
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if not 0.0 <= self.fraction < 0.5:
            raise ValueError(f"byzantine fraction must be in [0, 0.5), got {self.fraction}")
        if not 0.0 <= self.label_fraction <= 1.0:
            raise ValueError("label-flip fraction must be in [0, 1]")
        if self.kind == "adaptive" and (self.adaptive_on < 1 or self.adaptive_off < 0):
            raise ValueError("adaptive schedule needs on >= 1 and off >= 0")
        if self.start_round < 0:
            raise ValueError("start round must be >= 0")


def assign_byzantine(n_clients: int, fraction: float, seed: int) -> frozenset[int]:
    """Pick floor(fraction * n) distinct client ids, fixed for the run."""
    if not 0.0 <= fraction < 0.5:
        raise ValueError(f"byzantine fraction must be in [0, 0.5), got {fraction}")
    count = int(np.floor(fraction * n_clients))
    if count == 0:
        return frozenset()
    rng = derived_rng("byzantine-members", seed)
    return frozenset(int(i) for i in rng.choice(n_clients, size=count, replace=False))


def attack_active(plan: AttackPlan, round_index: int) -> bool:
    """Whether a Byzantine client misbehaves at this round."""
    if plan.kind in ("none", "label_flip"):
        return plan.kind == "label_flip" and round_index >= plan.start_round
    if round_index < plan.start_round:
        return False
    if plan.kind != "adaptive":
        return True
    phase = (round_index - plan.start_round) % (plan.adaptive_on + plan.adaptive_off)
    return phase < plan.adaptive_on


def corrupt_update(
    honest, plan: AttackPlan, round_index: int, client_id: int
) -> np.ndarray:
    """Apply the planned corruption to an honest local update."""
    honest = as_vector(honest)
    if not attack_active(plan, round_index) or plan.kind in ("none", "label_flip"):
        return honest.copy()
    if plan.kind == "gradient_flip":
        return -plan.flip_scale * honest
    if plan.kind == "adaptive":
        return -plan.flip_scale * honest
    if plan.kind == "sign_flip":
        # direction flipped, per-coordinate magnitude equalized to the mean
        # absolute coordinate so the attack differs from plain negation
        level = float(np.mean(np.abs(honest)))
        return -np.sign(honest) * level
    if plan.kind == "gaussian_noise":
        rng = counter_rng("attack-noise", plan.seed, client_id, round_index)
        return honest + rng.normal(0.0, plan.noise_sigma, size=honest.size)
    raise ValueError(f"unknown attack kind {plan.kind!r}")


def poison_labels(dataset, fraction: float, seed: int):
    """Flip y -> 1 - y for a seeded sample of floor(fraction * n) rows.

    Features are shared with the input dataset, bit for bit; only the label
    array is replaced.
    """
    from .trainer import Dataset

    if not 0.0 <= fraction <= 1.0:
        raise ValueError("label-flip fraction must be in [0, 1]")
    n = dataset.labels.size
    count = int(np.floor(fraction * n))
    labels = dataset.labels.copy()
    if count > 0:
        rows = derived_rng("label-flip", seed).choice(n, size=count, replace=False)
        labels[rows] = 1 - labels[rows]
    return Dataset(features=dataset.features, labels=labels)
