"""Acceptance suite: every release criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion.  Each test prints ``ACCEPTANCE <n> <name>: PASS`` or ``... FAIL``
before asserting, and enforces its runtime budget where one is stated.
"""

import itertools
import json
import time
from decimal import Decimal, getcontext

import numpy as np
import pytest

from pqfl import run_experiment, scenario_from_dict
from pqfl.kem import MLKEM1024, MockKEM
from pqfl.masking import combined_dropout_residual, mask_update, pair_key, sum_masked
from pqfl.privacy import add_dp_noise, calibrate_sigma
from pqfl.robust_agg import krum_aggregate, median_aggregate
from pqfl.shamir import ShamirConfig, shamir_reconstruct, shamir_share
from pqfl.simulation import FederationSimulator, emit_metrics
from pqfl.trainer import ModelSpec, gradient, init_model, predict_proba
from pqfl.vectors import QuantizationConfig, dequantize, quantize, trimmed_mean


def conclude(number: int, name: str, passed: bool, detail: str = ""):
    verdict = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {number:02d} {name}: {verdict}{suffix}")
    assert passed, f"criterion {number} ({name}) failed{suffix}"


def test_c01_masking_cancellation():
    """Masked sums equal direct modular sums, bit exact, across cohort sizes."""
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    ok = True
    for n in range(2, 9):
        for m in (1, 2, 4, 16, 64):
            for trial in range(1000):
                seeds = {
                    (i, j): rng.bytes(32) for i in range(n) for j in range(i + 1, n)
                }
                words = rng.integers(0, 1 << 32, size=(n, m), dtype=np.uint32)
                masked = [
                    mask_update(words[i], i, seeds, range(n), trial) for i in range(n)
                ]
                total = sum_masked(masked)
                direct = words.sum(axis=0, dtype=np.uint64).astype(np.uint32)
                if not np.array_equal(total, direct):
                    ok = False
                    break
    elapsed = time.perf_counter() - start
    conclude(1, "masking cancellation", ok and elapsed < 30, f"{elapsed:.1f}s")


def test_c02_dropout_recovery():
    """Every dropout subset of size <= 2 corrects to the survivors' sum."""
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    n, m = 5, 16
    subsets = [s for r in (1, 2) for s in itertools.combinations(range(n), r)]
    ok = True
    for dropped in subsets:
        for trial in range(200):
            seeds = {(i, j): rng.bytes(32) for i in range(n) for j in range(i + 1, n)}
            words = rng.integers(0, 1 << 32, size=(n, m), dtype=np.uint32)
            masked = [mask_update(words[i], i, seeds, range(n), trial) for i in range(n)]
            survivors = [i for i in range(n) if i not in dropped]
            residual = combined_dropout_residual(
                list(dropped), survivors, lambda d, p: seeds[pair_key(d, p)], trial, m
            )
            corrected = sum_masked([masked[i] for i in survivors]) - residual
            direct = words[survivors].sum(axis=0, dtype=np.uint64).astype(np.uint32)
            if not np.array_equal(corrected, direct):
                ok = False
                break
    elapsed = time.perf_counter() - start
    conclude(2, "dropout recovery", ok and elapsed < 30, f"{elapsed:.1f}s")


def test_c03_shamir_threshold():
    """All 3-of-5 subsets reconstruct; 2 shares stay ambiguous."""
    from test_shamir import forge_completion
    from pqfl.shamir import _secret_to_chunks

    start = time.perf_counter()
    cfg = ShamirConfig(participants=5, max_dropouts=2)
    rng = np.random.default_rng(303)
    triples = list(itertools.combinations(range(5), 3))
    ok = True
    for trial in range(1000):
        secret = rng.bytes(32)
        shares = shamir_share(secret, cfg, seed=trial)
        for combo in triples:
            if shamir_reconstruct([shares[i] for i in combo], cfg) != secret:
                ok = False
                break
    # ambiguity: every 2-subset completes to two different chosen secrets
    shares = shamir_share(b"\x5a" * 32, cfg, seed=99)
    for pair in itertools.combinations(shares, 2):
        for target in (bytes(32), b"\x01" + bytes(31)):
            forged = forge_completion(pair, forged_x=11, target_chunks=_secret_to_chunks(target))
            if shamir_reconstruct(list(pair) + [forged], cfg) != target:
                ok = False
    elapsed = time.perf_counter() - start
    conclude(3, "shamir threshold", ok and elapsed < 20, f"{elapsed:.1f}s")


def test_c04_dp_calibration():
    """Noise scale matches the closed form; empirical variance within 1%."""
    getcontext().prec = 50
    oracle = float(
        Decimal(1) * (2 * (Decimal("1.25") / Decimal("1e-5")).ln()).sqrt() / Decimal(2)
    )
    sigma = calibrate_sigma(2.0, 1e-5, 1.0)
    ok = abs(sigma - 2.42240) <= 1e-4 and abs(sigma - oracle) <= 1e-12
    noise = add_dp_noise(np.zeros(1_000_000), sigma, seed=404)
    ok = ok and abs(noise.var() - sigma**2) <= 0.01 * sigma**2
    conclude(4, "dp calibration", ok, f"sigma={sigma:.6f}")


def test_c05_gradient_correctness():
    """Analytic gradients match central finite differences (h = 1e-5)."""
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    worst = 0.0
    for model in range(20):
        hidden = tuple(int(h) for h in rng.integers(2, 5, size=int(rng.integers(1, 3))))
        spec = ModelSpec(input_dim=int(rng.integers(1, 4)), hidden=hidden, dropout=0.0)
        w = init_model(spec, seed=model) + 0.1 * rng.normal(size=spec.param_count)
        x = rng.normal(size=(5, spec.input_dim))
        y = rng.integers(0, 2, size=5).astype(np.float64)

        def loss(weights):
            p = np.clip(predict_proba(spec, weights, x), 1e-12, 1 - 1e-12)
            return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))

        analytic = gradient(spec, w, x, y)
        h = 1e-5
        numeric = np.empty_like(w)
        for k in range(w.size):
            bump = np.zeros_like(w)
            bump[k] = h
            numeric[k] = (loss(w + bump) - loss(w - bump)) / (2 * h)
        rel = np.max(np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-8))
        worst = max(worst, float(rel))
    elapsed = time.perf_counter() - start
    conclude(
        5, "gradient correctness", worst < 1e-4 and elapsed < 10,
        f"worst rel err {worst:.2e}, {elapsed:.1f}s",
    )


def test_c06_quantization():
    """Round-trip within 0.5/Q and additive homomorphism within 1.0/Q."""
    qc = QuantizationConfig(scale=10**6, bound=2.0)
    rng = np.random.default_rng(606)
    values = rng.uniform(-qc.bound, qc.bound, size=100_000)
    back = dequantize(quantize(values, qc), qc.scale)
    round_trip_ok = np.max(np.abs(back - values)) <= 0.5 / qc.scale
    other = rng.uniform(-qc.bound, qc.bound, size=100_000)
    summed = dequantize(quantize(values, qc) + quantize(other, qc), qc.scale, 2)
    homo_ok = np.max(np.abs(summed - (values + other))) <= 1.0 / qc.scale
    conclude(6, "quantization", bool(round_trip_ok and homo_ok))


def test_c07_kem_sizes_and_round_trip():
    """Production suite sizes are exactly 1568/1568/32; both suites round-trip."""
    ok = (
        MLKEM1024.pk_bytes == 1568
        and MLKEM1024.ct_bytes == 1568
        and MLKEM1024.ss_bytes == 32
    )
    for suite in (MLKEM1024, MockKEM):
        for i in range(100):
            pk, sk = suite.keygen(seed=i)
            ct, ss = suite.encaps(pk, randomness=i.to_bytes(32, "little"))
            ok = ok and len(pk) == suite.pk_bytes and len(ct) == suite.ct_bytes
            ok = ok and suite.decaps(ct, sk) == ss
    conclude(7, "kem sizes and round trip", ok)


RESILIENCE_DOC = {
    "federation": {"clients": 10, "rounds": 60, "cohort": 10, "mode": "plaintext",
                   "aggregator": "reputation", "seed": 303, "kem": "mock"},
    "model": {"hidden": [32, 16], "dropout": 0.0},
    "training": {"learning_rate": 0.02, "epochs": 2, "batch_size": 64,
                 "samples": 2000, "features": 16, "separation": 5.0,
                 "dirichlet_alpha": 1.0},
    "reputation": {"trim_alpha": 0.4},
    "attack": {"kind": "gradient_flip", "fraction": 0.4, "flip_scale": 1.8},
}


def test_c08_byzantine_resilience():
    """At 40% flipping attackers the trust-weighted aggregate must beat the
    plain mean by >= 15 points and stay within 2 points of the median."""
    start = time.perf_counter()
    finals = {}
    for aggregator in ("reputation", "fedavg", "median"):
        doc = json.loads(json.dumps(RESILIENCE_DOC))
        doc["federation"]["aggregator"] = aggregator
        finals[aggregator] = run_experiment(scenario_from_dict(doc)).final_metrics.accuracy
    elapsed = time.perf_counter() - start
    ok = (
        finals["reputation"] >= finals["fedavg"] + 0.15
        and finals["reputation"] >= finals["median"] - 0.02
        and elapsed < 180
    )
    conclude(
        8, "byzantine resilience", ok,
        f"rep={finals['reputation']:.3f} fedavg={finals['fedavg']:.3f} "
        f"median={finals['median']:.3f}, {elapsed:.0f}s",
    )


def test_c09_reputation_separation():
    """Attackers switching on at round 10 must be isolated by round 30."""
    start = time.perf_counter()
    doc = {
        "federation": {"clients": 10, "rounds": 50, "cohort": 10, "mode": "plaintext",
                       "aggregator": "reputation", "seed": 303, "kem": "mock"},
        "model": {"hidden": [32, 16], "dropout": 0.0},
        "training": {"learning_rate": 0.01, "epochs": 2, "batch_size": 64,
                     "samples": 2000, "features": 16, "separation": 5.0,
                     "dirichlet_alpha": 10.0},
        "attack": {"kind": "gradient_flip", "fraction": 0.2, "start_round": 10},
    }
    result = run_experiment(scenario_from_dict(doc))
    report = result.rounds[30]
    byz = [c.reputation for c in report.clients if c.is_byzantine]
    honest = [c.reputation for c in report.clients if not c.is_byzantine]
    byz_mean = float(np.mean(byz))
    honest_mean = float(np.mean(honest))
    elapsed = time.perf_counter() - start
    ok = (
        byz_mean < 0.4
        and honest_mean > 0.75
        and honest_mean - byz_mean > 0.3
        and elapsed < 120
    )
    conclude(
        9, "reputation separation", ok,
        f"byz={byz_mean:.3f} honest={honest_mean:.3f}, {elapsed:.0f}s",
    )


def oracle_trimmed_mean(updates, alpha):
    n = len(updates)
    k = int(np.floor(alpha * n))
    out = []
    for coord in range(len(updates[0])):
        values = sorted(float(u[coord]) for u in updates)
        kept = values[k : n - k]
        out.append(sum(kept) / len(kept))
    return np.array(out)


def oracle_median(updates):
    n = len(updates)
    out = []
    for coord in range(len(updates[0])):
        values = sorted(float(u[coord]) for u in updates)
        mid = n // 2
        out.append(values[mid] if n % 2 else (values[mid - 1] + values[mid]) / 2)
    return np.array(out)


def oracle_krum_index(updates, f):
    n = len(updates)
    scores = []
    for i in range(n):
        dists = sorted(
            float(np.sum((updates[i] - updates[j]) ** 2)) for j in range(n) if j != i
        )
        scores.append(sum(dists[: n - f - 2]))
    return int(np.argmin(scores))


def test_c10_robust_statistics_vs_oracles():
    """Trimmed mean, median, and the selection rule match brute force."""
    rng = np.random.default_rng(1010)
    ok = True
    # exhaustive small shapes with adversarial value patterns
    patterns = [
        lambda n, m: np.arange(n * m, dtype=np.float64).reshape(n, m),
        lambda n, m: np.ones((n, m)),
        lambda n, m: rng.integers(-3, 4, size=(n, m)).astype(np.float64),
    ]
    for n in range(1, 9):
        for m in range(1, 5):
            for make in patterns:
                rows = [r for r in make(n, m)]
                for alpha in (0.0, 0.2, 0.4):
                    if not np.allclose(
                        trimmed_mean(rows, alpha), oracle_trimmed_mean(rows, alpha),
                        rtol=0, atol=1e-12,
                    ):
                        ok = False
                if not np.allclose(
                    median_aggregate(rows), oracle_median(rows), rtol=0, atol=1e-12
                ):
                    ok = False
                if n >= 4:
                    f = rng.integers(0, n - 3 + 1)
                    expect = rows[oracle_krum_index(rows, f)]
                    if not np.array_equal(krum_aggregate(rows, int(f)), expect):
                        ok = False
    # fuzz corpus
    for _ in range(10_000):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, 5))
        rows = [rng.normal(scale=10, size=m) for _ in range(n)]
        alpha = float(rng.choice([0.0, 0.1, 0.2, 0.3, 0.45]))
        if not np.allclose(
            trimmed_mean(rows, alpha), oracle_trimmed_mean(rows, alpha),
            rtol=0, atol=1e-12,
        ):
            ok = False
        if not np.allclose(median_aggregate(rows), oracle_median(rows), rtol=0, atol=1e-12):
            ok = False
        if n >= 4:
            f = int(rng.integers(0, n - 3 + 1))
            if not np.array_equal(
                krum_aggregate(rows, f), rows[oracle_krum_index(rows, f)]
            ):
                ok = False
    conclude(10, "robust statistics vs oracles", ok)


DETERMINISM_DOC = {
    "federation": {"clients": 6, "rounds": 8, "cohort": 5, "mode": "hybrid",
                   "aggregator": "reputation", "seed": 1111, "kem": "mock"},
    "model": {"hidden": [12, 6], "dropout": 0.3},
    "training": {"learning_rate": 0.03, "epochs": 2, "batch_size": 32,
                 "samples": 720, "features": 6, "separation": 4.0,
                 "dirichlet_alpha": 2.0},
    "privacy": {"enabled": True, "epsilon": 2.0, "delta": 1e-5},
    "quantization": {"scale": 1000000, "clip_cap": 2.0},
    "dropouts": {"schedule": [[2, [1]], [5, [0, 3]]]},
}


def test_c11_thread_count_determinism(tmp_path):
    """rounds.jsonl must be byte-identical across worker counts."""
    cfg = scenario_from_dict(json.loads(json.dumps(DETERMINISM_DOC)))
    emit_metrics(run_experiment(cfg, workers=1), tmp_path / "w1")
    emit_metrics(run_experiment(cfg, workers=4), tmp_path / "w4")
    a = (tmp_path / "w1" / "rounds.jsonl").read_bytes()
    b = (tmp_path / "w4" / "rounds.jsonl").read_bytes()
    conclude(11, "thread-count determinism", a == b, f"{len(a)} bytes")


def test_c12_mode_equivalence():
    """Hybrid and plaintext trajectories stay within the accumulated
    per-round quantization budget of cohort * 0.5 / scale per coordinate."""
    base = {
        "federation": {"clients": 8, "rounds": 20, "cohort": 8,
                       "aggregator": "reputation", "seed": 5, "kem": "mock"},
        "model": {"hidden": [16, 8], "dropout": 0.0},
        "training": {"learning_rate": 0.01, "epochs": 1, "batch_size": 64,
                     "samples": 800, "features": 8, "separation": 4.0,
                     "dirichlet_alpha": 5.0},
        "quantization": {"scale": 1000000, "clip_cap": 4.0},
    }
    plain = json.loads(json.dumps(base))
    plain["federation"]["mode"] = "plaintext"
    hybrid = json.loads(json.dumps(base))
    hybrid["federation"]["mode"] = "hybrid"
    sim_p = FederationSimulator(scenario_from_dict(plain))
    sim_h = FederationSimulator(scenario_from_dict(hybrid))
    per_round = 8 * 0.5 / 1e6
    ok = True
    worst_ratio = 0.0
    for t in range(20):
        sim_p.run_round(t)
        sim_h.run_round(t)
        gap = float(np.max(np.abs(sim_p.model - sim_h.model)))
        budget = (t + 1) * per_round
        worst_ratio = max(worst_ratio, gap / budget)
        if gap > budget:
            ok = False
    conclude(12, "mode equivalence", ok, f"worst gap/budget {worst_ratio:.2f}")
