"""Scenario files: every knob of a federation run in one validated config.

A scenario is a TOML or JSON document with the sections [federation],
[model], [training], [reputation], [selection], [quantization], [privacy],
[shamir], [attack], and [dropouts].  Unknown sections or keys are errors, as
are cross-field inconsistencies; all problems are collected and reported
together with their field paths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .adversary import AttackPlan
from .privacy import DpConfig, InvalidBudget, calibrate_sigma
from .robust_agg import ReputationConfig, SelectionConfig
from .shamir import ShamirConfig
from .trainer import TrainConfig
from .vectors import HALF_RING, QuantizationConfig

MODES = ("plaintext", "masked", "hybrid")
AGGREGATORS = ("reputation", "fedavg", "median", "krum")
DATA_SOURCES = ("synthetic", "csv")

# hidden sizes of the full-scale reference model; desk scenarios use smaller
REFERENCE_HIDDEN = (128, 64, 32)


class ConfigError(ValueError):
    """Invalid scenario; ``problems`` lists field-level diagnostics."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True)
class FederationConfig:
    clients: int = 50
    rounds: int = 100
    cohort: int = 20
    mode: str = "plaintext"
    aggregator: str = "reputation"
    seed: int = 0
    kem: str = "ml-kem-1024"
    krum_f: int | None = None
    workers: int = 1
    clipping: bool = True


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"
    samples: int = 2000
    features: int = 20
    separation: float = 4.0
    dirichlet_alpha: float = 0.5
    test_fraction: float = 0.25
    csv_path: str | None = None
    label_column: str | None = None
    categorical_columns: tuple = ()


@dataclass(frozen=True)
class DropoutConfig:
    schedule: tuple = ()   # ((round, (client ids...)), ...)
    prob: float = 0.0      # stochastic per-round drop probability


@dataclass(frozen=True)
class ScenarioConfig:
    federation: FederationConfig = field(default_factory=FederationConfig)
    model_hidden: tuple = (32, 16)        # input_dim comes from the data at setup
    model_dropout: float = 0.3
    training: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    reputation: ReputationConfig = field(default_factory=ReputationConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    quantization: QuantizationConfig = field(default_factory=QuantizationConfig)
    clip_cap: float = 4.0                 # max clip threshold in masked/hybrid modes
    privacy: DpConfig = field(default_factory=DpConfig)
    shamir_max_dropouts: int = 2
    attack: AttackPlan = field(default_factory=AttackPlan)
    dropouts: DropoutConfig = field(default_factory=DropoutConfig)
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def shamir(self) -> ShamirConfig:
        return ShamirConfig(self.federation.clients, self.shamir_max_dropouts)

    def noise_sigma_bound(self) -> float:
        """Worst-case DP noise scale given the clip cap."""
        if not self.privacy.enabled:
            return 0.0
        return calibrate_sigma(self.privacy.epsilon, self.privacy.delta, self.clip_cap)

    def quantization_bound(self) -> float:
        """Per-coordinate magnitude the ring must absorb per client."""
        return self.clip_cap + 6.0 * self.noise_sigma_bound()

    def validate(self) -> None:
        problems = []
        fed = self.federation
        if fed.clients < 2:
            problems.append("federation.clients: need at least 2")
        if fed.rounds < 0:
            problems.append("federation.rounds: must be >= 0")
        if not 1 <= fed.cohort <= fed.clients:
            problems.append(
                f"federation.cohort: {fed.cohort} outside [1, clients={fed.clients}]"
            )
        if fed.mode not in MODES:
            problems.append(f"federation.mode: {fed.mode!r} not in {MODES}")
        if fed.aggregator not in AGGREGATORS:
            problems.append(
                f"federation.aggregator: {fed.aggregator!r} not in {AGGREGATORS}"
            )
        if fed.mode in ("masked", "hybrid") and fed.aggregator not in ("reputation", "fedavg"):
            problems.append(
                f"federation.aggregator: {fed.aggregator!r} needs per-client updates "
                "at the server and cannot run under masking"
            )
        if not fed.clipping and fed.mode in ("masked", "hybrid"):
            problems.append(
                "federation.clipping: the ring-overflow bound needs clipped "
                "updates; clipping can only be disabled in plaintext mode"
            )
        if not fed.clipping and self.privacy.enabled:
            problems.append(
                "federation.clipping: noise calibration needs a clipping "
                "threshold; enable clipping or disable privacy"
            )
        if fed.workers < 1:
            problems.append("federation.workers: must be >= 1")
        if fed.kem.strip().lower() not in ("mock", "mockkem", "ml-kem-1024", "kyber1024"):
            problems.append(f"federation.kem: unknown suite {fed.kem!r}")
        if fed.krum_f is not None and fed.krum_f < 0:
            problems.append("federation.krum_f: must be >= 0")

        if self.data.source not in DATA_SOURCES:
            problems.append(f"training.source: {self.data.source!r} not in {DATA_SOURCES}")
        if self.data.source == "csv":
            if not self.data.csv_path:
                problems.append("training.csv_path: required for csv source")
            if not self.data.label_column:
                problems.append("training.label_column: required for csv source")
        else:
            if self.data.samples < 2 * fed.clients:
                problems.append(
                    "training.samples: need at least 2 per client "
                    f"({self.data.samples} for {fed.clients} clients)"
                )
            if self.data.features < 1:
                problems.append("training.features: must be >= 1")
        if not 0.0 < self.data.test_fraction < 1.0:
            problems.append("training.test_fraction: must be in (0, 1)")
        if self.data.dirichlet_alpha <= 0:
            problems.append("training.dirichlet_alpha: must be > 0")

        for probe, label in (
            (self.training.validate, "training"),
            (self.reputation.validate, "reputation"),
            (self.attack.validate, "attack"),
            (self.privacy.validate, "privacy"),
        ):
            try:
                probe()
            except (ValueError, InvalidBudget) as exc:
                problems.append(f"{label}: {exc}")
        try:
            self.selection.validate(fed.clients)
        except ValueError as exc:
            problems.append(f"selection: {exc}")
        if self.selection.cohort_size != fed.cohort:
            problems.append(
                f"selection cohort {self.selection.cohort_size} != federation.cohort {fed.cohort}"
            )
        try:
            self.shamir.validate()
        except ValueError as exc:
            problems.append(f"shamir: {exc}")
        if self.clip_cap <= 0:
            problems.append("quantization.clip_cap: must be > 0")
        try:
            self.quantization.validate(max_cohort=1)
        except ValueError as exc:
            problems.append(f"quantization: {exc}")
        else:
            # ring-overflow safety: a full cohort of clipped, noised updates
            # must not wrap past half the ring
            headroom = fed.cohort * self.quantization.scale * self.quantization_bound()
            if headroom >= HALF_RING:
                problems.append(
                    "quantization: cohort * scale * (clip_cap + 6 sigma) = "
                    f"{headroom:.3g} >= 2**31; shrink the scale or clip cap"
                )

        if self.model_dropout < 0 or self.model_dropout >= 1:
            problems.append("model.dropout: must be in [0, 1)")
        if any(int(h) < 1 for h in self.model_hidden):
            problems.append("model.hidden: layer sizes must be positive")

        seen_rounds = set()
        for entry in self.dropouts.schedule:
            rnd, ids = entry
            if rnd in seen_rounds:
                problems.append(f"dropouts.schedule: duplicate round {rnd}")
            seen_rounds.add(rnd)
            if not 0 <= rnd:
                problems.append(f"dropouts.schedule: negative round {rnd}")
            if len(ids) > self.shamir_max_dropouts:
                problems.append(
                    f"dropouts.schedule: round {rnd} drops {len(ids)} clients, "
                    f"more than shamir.max_dropouts={self.shamir_max_dropouts}"
                )
            if len(set(ids)) != len(ids):
                problems.append(f"dropouts.schedule: round {rnd} repeats a client")
            for cid in ids:
                if not 0 <= cid < fed.clients:
                    problems.append(
                        f"dropouts.schedule: round {rnd} names unknown client {cid}"
                    )
        if not 0.0 <= self.dropouts.prob < 1.0:
            problems.append("dropouts.prob: must be in [0, 1)")

        if problems:
            raise ConfigError(problems)


_SECTION_KEYS = {
    "federation": {f.name for f in fields(FederationConfig)},
    "model": {"hidden", "dropout", "preset"},
    "training": {"learning_rate", "epochs", "batch_size"}
    | {f.name for f in fields(DataConfig)},
    "reputation": {"gamma", "trim_alpha", "tau_low", "tau_high", "penalty"},
    "selection": {"top_fraction", "random_fraction"},
    "quantization": {"scale", "clip_cap"},
    "privacy": {"enabled", "epsilon", "delta"},
    "shamir": {"max_dropouts"},
    "attack": {
        "kind", "fraction", "start_round", "flip_scale", "noise_sigma",
        "label_fraction", "adaptive_on", "adaptive_off", "seed",
    },
    "dropouts": {"schedule", "prob"},
}


def _check_keys(section: str, mapping: dict, problems: list) -> dict:
    allowed = _SECTION_KEYS[section]
    for key in mapping:
        if key not in allowed:
            problems.append(f"{section}.{key}: unknown key")
    return {k: v for k, v in mapping.items() if k in allowed}


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from a parsed document."""
    problems = []
    if not isinstance(doc, dict):
        raise ConfigError(["top level must be a table/object"])
    for section in doc:
        if section not in _SECTION_KEYS:
            problems.append(f"{section}: unknown section")
    sections = {
        name: _check_keys(name, doc.get(name, {}), problems) for name in _SECTION_KEYS
    }
    if problems:
        raise ConfigError(problems)

    fed_kwargs = dict(sections["federation"])
    if "krum_f" in fed_kwargs and fed_kwargs["krum_f"] is not None:
        fed_kwargs["krum_f"] = int(fed_kwargs["krum_f"])
    federation = FederationConfig(**fed_kwargs)

    model_sec = sections["model"]
    hidden = tuple(model_sec.get("hidden", (32, 16)))
    if model_sec.get("preset") == "reference":
        hidden = REFERENCE_HIDDEN
    elif "preset" in model_sec:
        raise ConfigError([f"model.preset: unknown preset {model_sec['preset']!r}"])

    train_sec = sections["training"]
    data_keys = {f.name for f in fields(DataConfig)}
    data_kwargs = {k: v for k, v in train_sec.items() if k in data_keys}
    if "categorical_columns" in data_kwargs:
        data_kwargs["categorical_columns"] = tuple(data_kwargs["categorical_columns"])
    train_kwargs = {k: v for k, v in train_sec.items() if k not in data_keys}
    training = TrainConfig(seed=federation.seed, **train_kwargs)

    dropout_sec = sections["dropouts"]
    schedule = []
    for entry in dropout_sec.get("schedule", ()):
        try:
            rnd, ids = entry
            schedule.append((int(rnd), tuple(int(i) for i in ids)))
        except (TypeError, ValueError):
            raise ConfigError(
                [f"dropouts.schedule: entry {entry!r} is not [round, [ids...]]"]
            ) from None

    quant_sec = sections["quantization"]
    clip_cap = float(quant_sec.get("clip_cap", 4.0))

    cfg = ScenarioConfig(
        federation=federation,
        model_hidden=hidden,
        model_dropout=float(model_sec.get("dropout", 0.3)),
        training=training,
        data=DataConfig(**data_kwargs),
        reputation=ReputationConfig(**sections["reputation"]),
        selection=SelectionConfig(
            cohort_size=federation.cohort,
            seed=federation.seed,
            **sections["selection"],
        ),
        quantization=QuantizationConfig(
            scale=int(quant_sec.get("scale", 10**6)),
            bound=clip_cap,  # refined below once sigma is known
        ),
        clip_cap=clip_cap,
        privacy=DpConfig(**sections["privacy"]),
        shamir_max_dropouts=int(sections["shamir"].get("max_dropouts", 2)),
        attack=AttackPlan(**sections["attack"]),
        dropouts=DropoutConfig(schedule=tuple(schedule), prob=float(dropout_sec.get("prob", 0.0))),
        raw=doc,
    )
    # saturation bound covers the clip cap plus a 6-sigma noise excursion
    cfg = ScenarioConfig(
        **{
            **{f.name: getattr(cfg, f.name) for f in fields(ScenarioConfig)},
            "quantization": QuantizationConfig(
                scale=cfg.quantization.scale, bound=cfg.quantization_bound()
            ),
        }
    )
    cfg.validate()
    return cfg


def load_scenario(path) -> ScenarioConfig:
    """Parse a .toml or .json scenario file."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            doc = tomllib.loads(blob.decode("utf-8"))
        elif suffix == ".json":
            doc = json.loads(blob.decode("utf-8"))
        else:
            raise ConfigError([f"{path}: expected a .toml or .json scenario file"])
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError([f"{path}: parse error: {exc}"]) from exc
    try:
        return scenario_from_dict(doc)
    except TypeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
