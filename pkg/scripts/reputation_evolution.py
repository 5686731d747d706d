#!/usr/bin/env python3
"""Track per-client reputations while attackers switch on mid-run.

Runs the reputation-evolution scenario and writes the full metrics set;
reputations.csv holds the round x client trust matrix for plotting.

Usage:
    python scripts/reputation_evolution.py --out results/reputation
"""

import argparse
from pathlib import Path

import numpy as np

from pqfl import emit_metrics, load_scenario, run_experiment


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--scenario",
        default=Path(__file__).resolve().parents[1] / "scenarios/reputation_evolution.toml",
    )
    parser.add_argument("--out", default="results/reputation")
    args = parser.parse_args()

    result = run_experiment(load_scenario(args.scenario))
    emit_metrics(result, args.out)
    for t in (10, 20, 30, 40, len(result.rounds) - 1):
        report = result.rounds[t]
        byz = [c.reputation for c in report.clients if c.is_byzantine]
        honest = [c.reputation for c in report.clients if not c.is_byzantine]
        print(
            f"round {t:3d}: mean reputation byzantine={np.mean(byz):.3f} "
            f"honest={np.mean(honest):.3f} accuracy={report.metrics.accuracy:.3f}"
        )
    print(f"wrote metrics to {args.out}")


if __name__ == "__main__":
    main()
