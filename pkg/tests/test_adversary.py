"""Attack behaviors: update corruptions, schedules, poisoning, assignment."""

import numpy as np
import pytest

from pqfl.adversary import (
    AttackPlan,
    assign_byzantine,
    attack_active,
    corrupt_update,
    poison_labels,
)
from pqfl.trainer import Dataset, make_synthetic


class TestCorruptUpdate:
    def test_gradient_flip_negates(self):
        plan = AttackPlan(kind="gradient_flip", fraction=0.2, flip_scale=1.0)
        out = corrupt_update([1.0, -2.0], plan, round_index=0, client_id=3)
        assert np.array_equal(out, [-1.0, 2.0])

    def test_gradient_flip_is_involution(self):
        plan = AttackPlan(kind="gradient_flip", fraction=0.2, flip_scale=1.0)
        honest = np.array([0.5, -0.25, 3.0])
        twice = corrupt_update(corrupt_update(honest, plan, 0, 1), plan, 0, 1)
        assert np.array_equal(twice, honest)

    def test_gradient_flip_scale(self):
        plan = AttackPlan(kind="gradient_flip", fraction=0.2, flip_scale=2.5)
        out = corrupt_update([2.0], plan, 0, 0)
        assert out[0] == -5.0

    def test_sign_flip_equalizes_magnitudes(self):
        plan = AttackPlan(kind="sign_flip", fraction=0.2)
        out = corrupt_update([2.0, -4.0], plan, 0, 0)
        assert np.allclose(out, [-3.0, 3.0])  # mean |coord| = 3

    def test_gaussian_noise_deterministic(self):
        plan = AttackPlan(kind="gaussian_noise", fraction=0.2, noise_sigma=0.5, seed=9)
        honest = np.zeros(32)
        a = corrupt_update(honest, plan, 4, 2)
        b = corrupt_update(honest, plan, 4, 2)
        other_round = corrupt_update(honest, plan, 5, 2)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, other_round)

    def test_none_and_label_flip_pass_through(self):
        honest = np.array([1.0, 2.0])
        for kind in ("none", "label_flip"):
            plan = AttackPlan(kind=kind, fraction=0.2)
            assert np.array_equal(corrupt_update(honest, plan, 0, 0), honest)

    def test_before_start_round_is_honest(self):
        plan = AttackPlan(kind="gradient_flip", fraction=0.2, start_round=10)
        honest = np.array([1.0])
        assert np.array_equal(corrupt_update(honest, plan, 9, 0), honest)
        assert np.array_equal(corrupt_update(honest, plan, 10, 0), -honest)


class TestAdaptiveSchedule:
    PLAN = AttackPlan(
        kind="adaptive", fraction=0.2, start_round=10, adaptive_on=10, adaptive_off=10
    )

    def test_off_period_is_honest(self):
        honest = np.array([1.0, -1.0])
        # rounds 10-19 attack, 20-29 honest, 30-39 attack ...
        assert np.array_equal(corrupt_update(honest, self.PLAN, 25, 0), honest)

    def test_on_period_flips(self):
        honest = np.array([1.0, -1.0])
        assert np.array_equal(corrupt_update(honest, self.PLAN, 12, 0), -honest)
        assert np.array_equal(corrupt_update(honest, self.PLAN, 33, 0), -honest)

    def test_schedule_boundaries(self):
        assert not attack_active(self.PLAN, 9)
        assert attack_active(self.PLAN, 10)
        assert attack_active(self.PLAN, 19)
        assert not attack_active(self.PLAN, 20)
        assert not attack_active(self.PLAN, 29)
        assert attack_active(self.PLAN, 30)


class TestPoisonLabels:
    def test_full_fraction_flips_everything(self):
        data = make_synthetic(50, 2, 1.0, seed=0)
        poisoned = poison_labels(data, 1.0, seed=1)
        assert np.array_equal(poisoned.labels, 1 - data.labels)

    def test_zero_fraction_is_identity(self):
        data = make_synthetic(50, 2, 1.0, seed=0)
        poisoned = poison_labels(data, 0.0, seed=1)
        assert np.array_equal(poisoned.labels, data.labels)

    def test_half_fraction_flips_exactly_half(self):
        data = Dataset(np.zeros((100, 1)), np.zeros(100, dtype=np.int64))
        poisoned = poison_labels(data, 0.5, seed=2)
        assert int(poisoned.labels.sum()) == 50

    def test_features_bit_identical(self):
        data = make_synthetic(50, 3, 1.0, seed=0)
        poisoned = poison_labels(data, 0.7, seed=3)
        assert poisoned.features is data.features


class TestAssignByzantine:
    def test_zero_fraction_empty(self):
        assert assign_byzantine(50, 0.0, seed=0) == frozenset()

    def test_forty_percent_of_fifty(self):
        members = assign_byzantine(50, 0.4, seed=0)
        assert len(members) == 20
        assert all(0 <= m < 50 for m in members)

    def test_deterministic(self):
        assert assign_byzantine(30, 0.3, seed=5) == assign_byzantine(30, 0.3, seed=5)

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            assign_byzantine(10, 0.5, seed=0)


def test_plan_validation():
    AttackPlan(kind="gradient_flip", fraction=0.4).validate()
    with pytest.raises(ValueError):
        AttackPlan(kind="meteor").validate()
    with pytest.raises(ValueError):
        AttackPlan(kind="none", fraction=0.6).validate()
