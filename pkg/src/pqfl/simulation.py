"""Round orchestration for a full federation run.

Each round executes, in order: stratified cohort selection; broadcast of the
global model (plus normalized client weights in the masked modes); parallel
local training with the adversary hook applied to Byzantine clients'
updates; adaptive clipping; optional Gaussian privatization; scheduled or
stochastic dropouts; aggregation (plaintext or masked with Shamir-backed
dropout recovery); reputation scoring; and evaluation on the held-out split.

Mode semantics:

* ``plaintext`` — the server sees individual updates; any aggregator works
  and reputations are scored from the received updates.
* ``masked``    — updates travel only as masked ring vectors; the model step
  comes from the unmasked sum with client-side weighting, and no reputation
  scoring happens because no per-client channel exists.
* ``hybrid``    — the model step is computed exactly as in ``masked``, while
  per-client plaintext updates additionally feed the reputation engine
  through a simulation-only oracle channel that a real deployment would not
  have.

Every random stream derives from the master seed, so a run is reproducible
for any worker count.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import masking, robust_agg, shamir, trainer
from .adversary import assign_byzantine, corrupt_update, poison_labels
from .kem import get_suite
from .privacy import add_dp_noise, calibrate_sigma
from .robust_agg import AllZeroWeights, ClientRecord
from .scenario import ScenarioConfig
from .seeding import derive_seed, derived_rng
from .trainer import Dataset, MetricsReport, ModelSpec, TrainConfig
from .vectors import quantize

BYTES_PER_PARAM = 4  # 32-bit parameters on the wire, both directions


class IoError(OSError):
    pass


@dataclass(frozen=True)
class ClientRoundView:
    client_id: int
    reputation: float
    similarity: float | None
    magnitude: float | None
    score: float | None
    is_byzantine: bool
    participated: bool
    dropped: bool


@dataclass(frozen=True)
class ByteCounts:
    model_down: int = 0
    upload: int = 0
    kem_pk: int = 0
    kem_ct: int = 0
    shares: int = 0

    @property
    def total(self) -> int:
        return self.model_down + self.upload + self.kem_pk + self.kem_ct + self.shares


@dataclass(frozen=True)
class RoundReport:
    round_index: int
    metrics: MetricsReport
    clients: tuple[ClientRoundView, ...]
    bytes_by_client: dict[int, ByteCounts]
    latency_s: float
    aborted: bool = False


@dataclass
class ExperimentResult:
    rounds: list[RoundReport]
    convergence_round: int | None
    final_metrics: MetricsReport
    config: dict
    total_bytes: dict[str, int]
    total_epsilon: str = "not tracked"  # per-round mechanism only, no composition


def convergence_round(accuracies, window: int = 5, level: float = 0.995) -> int | None:
    """First round whose trailing moving-average accuracy reaches ``level``
    of the run's best moving average."""
    if not accuracies:
        return None
    mov = [float(np.mean(accuracies[max(0, t - window + 1) : t + 1]))
           for t in range(len(accuracies))]
    threshold = level * max(mov)
    for t, value in enumerate(mov):
        if value >= threshold:
            return t
    return None


class FederationSimulator:
    """Holds federation state and advances it one round at a time."""

    def __init__(self, cfg: ScenarioConfig, workers: int | None = None):
        cfg.validate()
        self.cfg = cfg
        self.workers = workers if workers is not None else cfg.federation.workers
        fed = cfg.federation
        self.master = fed.seed

        train, test = self._load_data()
        self.test_data = test
        self.spec = ModelSpec(
            input_dim=train.dim, hidden=cfg.model_hidden, dropout=cfg.model_dropout
        )
        self.model = trainer.init_model(self.spec, derive_seed("model-init", self.master))

        parts = trainer.partition_non_iid(
            train, fed.clients, cfg.data.dirichlet_alpha,
            derive_seed("partition", self.master),
        )
        self.byzantine = assign_byzantine(
            fed.clients, cfg.attack.fraction,
            derive_seed("byzantine", self.master, cfg.attack.seed),
        )
        self.records = [
            ClientRecord(client_id=cid, n_samples=parts[cid].n) for cid in range(fed.clients)
        ]
        self.datasets: dict[int, Dataset] = {cid: parts[cid] for cid in range(fed.clients)}
        self.poisoned: dict[int, Dataset] = {}
        if cfg.attack.kind == "label_flip":
            for cid in self.byzantine:
                self.poisoned[cid] = poison_labels(
                    parts[cid], cfg.attack.label_fraction,
                    derive_seed("poison", self.master, cid),
                )

        self.masked_mode = fed.mode in ("masked", "hybrid")
        self.suite = get_suite(fed.kem)
        self.pair_seeds: dict[tuple[int, int], bytes] = {}
        self.seed_shares: dict[tuple[int, int], list[bytes]] = {}
        if self.masked_mode:
            self._setup_secure_aggregation()

    # -- setup --

    def _load_data(self) -> tuple[Dataset, Dataset]:
        data_cfg = self.cfg.data
        if data_cfg.source == "csv":
            full = trainer.ingest_csv(
                data_cfg.csv_path, data_cfg.label_column, data_cfg.categorical_columns
            )
        else:
            full = trainer.make_synthetic(
                data_cfg.samples, data_cfg.features, data_cfg.separation,
                derive_seed("synthetic", self.master),
            )
        return trainer.train_test_split(
            full, data_cfg.test_fraction, derive_seed("split", self.master)
        )

    def _setup_secure_aggregation(self) -> None:
        fed = self.cfg.federation
        clients = []
        for cid in range(fed.clients):
            pk, sk = self.suite.keygen(derive_seed("kem-keygen", self.master, cid))
            clients.append((cid, pk, sk))
        self.pair_seeds = masking.establish_pairwise_seeds(
            clients, self.suite, derive_seed("handshake", self.master)
        )
        shamir_cfg = self.cfg.shamir
        for key, seed in self.pair_seeds.items():
            shares = shamir.shamir_share(
                seed, shamir_cfg, derive_seed("seed-shares", self.master, *key)
            )
            self.seed_shares[key] = [s.encode() for s in shares]

    def _reconstruct_pair_seed(self, dropped_id: int, peer_id: int, excluded) -> bytes:
        """Rebuild a dropped client's pairwise seed from surviving shares."""
        key = masking.pair_key(dropped_id, peer_id)
        cfg = self.cfg.shamir
        holders = [cid for cid in range(cfg.participants) if cid not in excluded]
        collected = [
            shamir.Share.decode(self.seed_shares[key][cid])
            for cid in holders[: cfg.threshold]
        ]
        return shamir.shamir_reconstruct(collected, cfg)

    # -- per-round pieces --

    def _local_update(self, round_index: int, cid: int) -> np.ndarray:
        data = self.datasets[cid]
        if cid in self.poisoned and round_index >= self.cfg.attack.start_round:
            data = self.poisoned[cid]
        tc = self.cfg.training
        cfg = TrainConfig(
            learning_rate=tc.learning_rate,
            epochs=tc.epochs,
            batch_size=tc.batch_size,
            seed=derive_seed("local-train", self.master, round_index, cid),
        )
        trained = trainer.local_train(self.spec, self.model, data, cfg)
        delta = trained - self.model
        if not np.all(np.isfinite(delta)):
            raise FloatingPointError(
                f"client {cid} diverged at round {round_index}; "
                "lower the learning rate or epochs"
            )
        if cid in self.byzantine:
            delta = corrupt_update(delta, self.cfg.attack, round_index, cid)
        return delta

    def _pick_dropouts(self, round_index: int, cohort: list[int]) -> list[int]:
        scheduled = dict(self.cfg.dropouts.schedule).get(round_index, ())
        dropped = [cid for cid in scheduled if cid in cohort]
        if self.cfg.dropouts.prob > 0.0:
            rng = derived_rng("stochastic-dropouts", self.master, round_index)
            for cid in cohort:
                if cid not in dropped and rng.random() < self.cfg.dropouts.prob:
                    dropped.append(cid)
        # never exceed the recoverable budget; keep the lowest ids
        return sorted(dropped)[: self.cfg.shamir_max_dropouts]

    def _byte_counts(self, round_index: int, cohort, survivors) -> dict[int, ByteCounts]:
        fed = self.cfg.federation
        m = self.spec.param_count
        counts = {}
        for cid in range(fed.clients):
            model_down = BYTES_PER_PARAM * m if cid in cohort else 0
            upload = BYTES_PER_PARAM * m if cid in survivors else 0
            kem_pk = kem_ct = shares = 0
            if self.masked_mode and round_index == 0:
                kem_pk = self.suite.pk_bytes
                kem_ct = self.suite.ct_bytes * (fed.clients - 1 - cid)
                shares = (fed.clients - 1) * fed.clients * shamir.SHARE_BYTES
            counts[cid] = ByteCounts(model_down, upload, kem_pk, kem_ct, shares)
        return counts

    def run_round(self, round_index: int) -> RoundReport:
        start = time.perf_counter()
        fed = self.cfg.federation
        cohort = robust_agg.select_clients(self.records, self.cfg.selection, round_index)
        reput = {r.client_id: r.reputation for r in self.records}
        sizes = {r.client_id: r.n_samples for r in self.records}

        # broadcast weights for client-side weighting under masking
        if fed.aggregator == "reputation":
            raw_weights = {cid: reput[cid] * sizes[cid] for cid in cohort}
        else:
            raw_weights = {cid: float(sizes[cid]) for cid in cohort}
        weight_total = sum(raw_weights.values())
        aborted = weight_total <= 0.0
        broadcast_done = not aborted  # zero weights abort before any traffic

        scores = []
        survivors: list[int] = []
        dropped: list[int] = []
        if not aborted:
            if self.workers > 1:
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    futures = {
                        cid: pool.submit(self._local_update, round_index, cid)
                        for cid in cohort
                    }
                    deltas = {cid: futures[cid].result() for cid in cohort}
            else:
                deltas = {cid: self._local_update(round_index, cid) for cid in cohort}

            sigma = 0.0
            if fed.clipping:
                norms = [float(np.linalg.norm(deltas[cid])) for cid in cohort]
                clip_c = robust_agg.adaptive_clip_threshold(norms)
                if self.masked_mode:
                    clip_c = min(clip_c, self.cfg.clip_cap)
                if self.cfg.privacy.enabled:
                    sigma = calibrate_sigma(
                        self.cfg.privacy.epsilon, self.cfg.privacy.delta, clip_c
                    )
            prepared = {}
            for cid in cohort:
                update = deltas[cid]
                if fed.clipping:
                    update = robust_agg.clip_update(update, clip_c)
                if sigma > 0.0:
                    update = add_dp_noise(update, sigma, (self.master, cid, round_index))
                prepared[cid] = update

            dropped = self._pick_dropouts(round_index, cohort)
            survivors = [cid for cid in cohort if cid not in dropped]
            if not survivors:
                aborted = True

        if not aborted:
            try:
                aggregate = self._aggregate(
                    round_index, cohort, survivors, prepared, raw_weights
                )
                self.model = self.model + aggregate
            except AllZeroWeights:
                aborted = True
            if not aborted and fed.mode in ("plaintext", "hybrid"):
                # hybrid: simulation-only oracle channel into the scorer
                recs = [self.records[cid] for cid in survivors]
                scores = robust_agg.score_round(
                    [prepared[cid] for cid in survivors], recs, self.cfg.reputation
                )
                robust_agg.apply_scores(self.records, scores)

        metrics = trainer.evaluate(self.spec, self.model, self.test_data)
        score_by_id = {s.client_id: s for s in scores}
        views = tuple(
            ClientRoundView(
                client_id=cid,
                reputation=self.records[cid].reputation,
                similarity=getattr(score_by_id.get(cid), "similarity", None),
                magnitude=getattr(score_by_id.get(cid), "magnitude", None),
                score=getattr(score_by_id.get(cid), "score", None),
                is_byzantine=cid in self.byzantine,
                participated=cid in cohort,
                dropped=cid in dropped,
            )
            for cid in range(fed.clients)
        )
        return RoundReport(
            round_index=round_index,
            metrics=metrics,
            clients=views,
            bytes_by_client=self._byte_counts(
                round_index,
                set(cohort) if broadcast_done else set(),
                set(survivors),
            ),
            latency_s=time.perf_counter() - start,
            aborted=aborted,
        )

    def _aggregate(self, round_index, cohort, survivors, prepared, raw_weights):
        fed = self.cfg.federation
        if fed.mode == "plaintext":
            updates = [prepared[cid] for cid in survivors]
            if fed.aggregator == "reputation":
                return robust_agg.aggregate_weighted(
                    updates,
                    [self.records[cid].reputation for cid in survivors],
                    [self.records[cid].n_samples for cid in survivors],
                )
            if fed.aggregator == "fedavg":
                return robust_agg.fedavg_aggregate(
                    updates, [self.records[cid].n_samples for cid in survivors]
                )
            if fed.aggregator == "median":
                return robust_agg.median_aggregate(updates)
            if fed.aggregator == "krum":
                f = fed.krum_f
                if f is None:
                    f = int(np.floor(self.cfg.attack.fraction * fed.clients))
                return robust_agg.krum_aggregate(updates, f)
            raise ValueError(f"unknown aggregator {fed.aggregator!r}")

        # masked path: weight client-side, quantize, mask over the cohort
        weight_total = sum(raw_weights.values())
        masked_updates = []
        for cid in survivors:
            scaled = (raw_weights[cid] / weight_total) * prepared[cid]
            words = quantize(scaled, self.cfg.quantization)
            masked_updates.append(
                masking.mask_update(words, cid, self.pair_seeds, cohort, round_index)
            )
        residual = None
        dropped_ids = [cid for cid in cohort if cid not in survivors]
        if dropped_ids:
            residual = masking.combined_dropout_residual(
                dropped_ids,
                survivors,
                lambda d, p: self._reconstruct_pair_seed(d, p, excluded=dropped_ids),
                round_index,
                self.spec.param_count,
            )
        summed = masking.unmask_aggregate(
            masked_updates, self.cfg.quantization.scale, residual
        )
        survivor_weight = sum(raw_weights[cid] for cid in survivors) / weight_total
        if survivor_weight <= 0.0:
            raise AllZeroWeights("surviving clients carry zero weight")
        return summed / survivor_weight

    def run(self) -> ExperimentResult:
        reports = [self.run_round(t) for t in range(self.cfg.federation.rounds)]
        accs = [r.metrics.accuracy for r in reports]
        final = reports[-1].metrics if reports else trainer.evaluate(
            self.spec, self.model, self.test_data
        )
        totals: dict[str, int] = {
            "model_down": 0, "upload": 0, "kem_pk": 0, "kem_ct": 0, "shares": 0
        }
        for report in reports:
            for counts in report.bytes_by_client.values():
                for key in totals:
                    totals[key] += getattr(counts, key)
        return ExperimentResult(
            rounds=reports,
            convergence_round=convergence_round(accs),
            final_metrics=final,
            config=self.cfg.raw,
            total_bytes=totals,
        )


def run_experiment(cfg: ScenarioConfig, workers: int | None = None) -> ExperimentResult:
    return FederationSimulator(cfg, workers=workers).run()


# -- static byte accounting (per client per round view) --


@dataclass(frozen=True)
class ByteAccounting:
    param_count: int
    model_down: int
    upload: int
    kem_pk: int        # amortized: transmitted once at setup
    kem_ct: int        # amortized: one ciphertext per handshake
    shares: int        # amortized: all shares a client distributes at setup
    amortized_fields: tuple[str, ...] = ("kem_pk", "kem_ct", "shares")

    @property
    def total(self) -> int:
        return self.model_down + self.upload + self.kem_pk + self.kem_ct + self.shares


def account_bytes(cfg: ScenarioConfig, param_count: int | None = None) -> ByteAccounting:
    """Per-client byte table in the shape of the overhead comparison table.

    ``kem_pk`` and ``kem_ct`` are the suite's exact sizes (one item each, the
    amortized per-client view); ``shares`` covers every share a client
    distributes at setup: one 42-byte share to each of N participants for
    each of its N - 1 pairwise seeds.  Plaintext mode carries no secure
    aggregation material at all.
    """
    if param_count is None:
        if cfg.data.source == "csv":
            input_dim = trainer.ingest_csv(
                cfg.data.csv_path, cfg.data.label_column, cfg.data.categorical_columns
            ).dim
        else:
            input_dim = cfg.data.features
        spec = ModelSpec(
            input_dim=input_dim, hidden=cfg.model_hidden, dropout=cfg.model_dropout
        )
        param_count = spec.param_count
    n = cfg.federation.clients
    masked = cfg.federation.mode in ("masked", "hybrid")
    suite = get_suite(cfg.federation.kem)
    return ByteAccounting(
        param_count=param_count,
        model_down=BYTES_PER_PARAM * param_count,
        upload=BYTES_PER_PARAM * param_count,
        kem_pk=suite.pk_bytes if masked else 0,
        kem_ct=suite.ct_bytes if masked else 0,
        shares=(n - 1) * n * shamir.SHARE_BYTES if masked else 0,
    )


# -- metrics emission --


def _round9(value):
    if isinstance(value, float):
        return float(f"{value:.9g}")
    if isinstance(value, dict):
        return {k: _round9(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round9(v) for v in value]
    return value


def _report_dict(report: RoundReport) -> dict:
    return {
        "round": report.round_index,
        "aborted": report.aborted,
        "metrics": asdict(report.metrics),
        "clients": [asdict(view) for view in report.clients],
        "bytes": {str(cid): asdict(c) for cid, c in sorted(report.bytes_by_client.items())},
    }


def emit_metrics(result: ExperimentResult, out_dir) -> list[Path]:
    """Write rounds.jsonl, reputations.csv, bytes.csv, summary.json, latency.csv.

    All files are deterministic functions of the result except latency.csv,
    which records wall-clock timings and is excluded from reproducibility
    guarantees.  Floats carry 9 significant digits.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc

    written = []

    def _write(name: str, text: str) -> None:
        path = out / name
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    lines = [
        json.dumps(_round9(_report_dict(r)), separators=(",", ":")) for r in result.rounds
    ]
    _write("rounds.jsonl", "".join(line + "\n" for line in lines))

    n_clients = len(result.rounds[0].clients) if result.rounds else 0
    client_cols = [f"client_{i}" for i in range(n_clients)]
    rep_rows = [",".join(["round"] + client_cols)]
    for report in result.rounds:
        reps = ",".join(f"{v.reputation:.9g}" for v in report.clients)
        rep_rows.append(f"{report.round_index},{reps}")
    _write("reputations.csv", "\n".join(rep_rows) + "\n")

    byte_rows = ["round,client,model_down,upload,kem_pk,kem_ct,shares"]
    for report in result.rounds:
        for cid, c in sorted(report.bytes_by_client.items()):
            byte_rows.append(
                f"{report.round_index},{cid},{c.model_down},{c.upload},"
                f"{c.kem_pk},{c.kem_ct},{c.shares}"
            )
    _write("bytes.csv", "\n".join(byte_rows) + "\n")

    summary = {
        "rounds": len(result.rounds),
        "convergence_round": result.convergence_round,
        "final_metrics": _round9(asdict(result.final_metrics)),
        "total_bytes": result.total_bytes,
        "total_epsilon": result.total_epsilon,
        "config": _round9(result.config),
    }
    _write("summary.json", json.dumps(summary, indent=2) + "\n")

    lat_rows = ["round,seconds"]
    for report in result.rounds:
        lat_rows.append(f"{report.round_index},{report.latency_s:.9g}")
    _write("latency.csv", "\n".join(lat_rows) + "\n")
    return written


# -- standalone masking checker --


@dataclass
class MaskingCheckReport:
    clients: int
    dim: int
    trials: int
    failures: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_masking(
    n_clients: int = 5,
    dim: int = 32,
    trials: int = 1000,
    seed: int = 0,
    corrupt_hook=None,
) -> MaskingCheckReport:
    """Property check: mask cancellation and dropout recovery, bit exact.

    Each trial draws fresh pairwise seeds and updates, verifies that the
    masked sum equals the direct modular sum, then drops a random subset of
    up to two clients and verifies residual correction.  ``corrupt_hook``
    (masked_updates, trial) -> masked_updates lets tests inject faults; any
    mismatch is reported with the first failing coordinate.
    """
    if n_clients < 2:
        raise ValueError("need at least 2 clients")
    rng = np.random.default_rng(seed)
    report = MaskingCheckReport(clients=n_clients, dim=dim, trials=trials)
    for trial in range(trials):
        seeds = {
            (i, j): rng.bytes(32)
            for i in range(n_clients)
            for j in range(i + 1, n_clients)
        }
        words = [
            rng.integers(0, 1 << 32, size=dim, dtype=np.uint32)
            for _ in range(n_clients)
        ]
        cohort = list(range(n_clients))
        masked = [
            masking.mask_update(words[cid], cid, seeds, cohort, trial)
            for cid in cohort
        ]
        if corrupt_hook is not None:
            masked = corrupt_hook(masked, trial)

        direct = np.zeros(dim, dtype=np.uint32)
        for w in words:
            direct += w
        total = masking.sum_masked(masked)
        if not np.array_equal(total, direct):
            bad = int(np.flatnonzero(total != direct)[0])
            report.failures.append(
                {"trial": trial, "check": "cancellation", "coordinate": bad}
            )
            continue

        n_drop = int(rng.integers(1, min(2, n_clients - 1) + 1))
        dropped = sorted(
            int(i) for i in rng.choice(n_clients, size=n_drop, replace=False)
        )
        survivors = [cid for cid in cohort if cid not in dropped]
        residual = masking.combined_dropout_residual(
            dropped, survivors,
            lambda d, p: seeds[masking.pair_key(d, p)], trial, dim,
        )
        surv_total = masking.sum_masked([masked[cid] for cid in survivors]) - residual
        surv_direct = np.zeros(dim, dtype=np.uint32)
        for cid in survivors:
            surv_direct += words[cid]
        if not np.array_equal(surv_total, surv_direct):
            bad = int(np.flatnonzero(surv_total != surv_direct)[0])
            report.failures.append(
                {"trial": trial, "check": "dropout-recovery", "coordinate": bad}
            )
    return report
