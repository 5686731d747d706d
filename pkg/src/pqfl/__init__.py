"""Byzantine-robust federated learning with post-quantum secure aggregation.

Library layout:

* ``vectors``     — parameter-vector math, ring encoding, trimmed mean
* ``trainer``     — model, local SGD, datasets, metrics
* ``robust_agg``  — reputation scoring, weighted aggregation, baselines
* ``mlkem``/``kem`` — ML-KEM-1024 and the deterministic mock suite
* ``shamir``      — threshold sharing of pairwise seeds
* ``masking``     — pairwise masking, unmasking, dropout residuals
* ``privacy``     — Gaussian mechanism
* ``adversary``   — Byzantine client behaviors
* ``scenario``/``simulation``/``cli`` — configuration, orchestration, CLI
"""

from .scenario import ConfigError, ScenarioConfig, load_scenario, scenario_from_dict
from .simulation import (
    ExperimentResult,
    FederationSimulator,
    RoundReport,
    account_bytes,
    emit_metrics,
    run_experiment,
    verify_masking,
)

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "load_scenario",
    "scenario_from_dict",
    "ExperimentResult",
    "FederationSimulator",
    "RoundReport",
    "account_bytes",
    "emit_metrics",
    "run_experiment",
    "verify_masking",
]

__version__ = "0.1.0"
