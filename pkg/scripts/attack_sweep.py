#!/usr/bin/env python3
"""Sweep Byzantine fraction x aggregator and record final accuracies.

Produces the data behind the resilience comparison: how each aggregation
rule degrades as the attacker share grows.

Usage:
    python scripts/attack_sweep.py --out results/sweep.csv
"""

import argparse
import copy
import csv
from pathlib import Path

from pqfl import load_scenario, run_experiment, scenario_from_dict

AGGREGATORS = ("reputation", "fedavg", "median", "krum")
FRACTIONS = (0.0, 0.1, 0.2, 0.3, 0.4)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--scenario", default=Path(__file__).resolve().parents[1] / "scenarios/resilience_beta40.toml"
    )
    parser.add_argument("--out", default="results/attack_sweep.csv")
    args = parser.parse_args()

    base = load_scenario(args.scenario).raw
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for fraction in FRACTIONS:
        for aggregator in AGGREGATORS:
            doc = copy.deepcopy(base)
            doc["federation"]["aggregator"] = aggregator
            doc["attack"]["fraction"] = fraction
            result = run_experiment(scenario_from_dict(doc))
            acc = result.final_metrics.accuracy
            conv = result.convergence_round
            rows.append((fraction, aggregator, acc, conv))
            print(f"beta={fraction:.1f} {aggregator:>11}: acc={acc:.3f} conv={conv}")
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["byzantine_fraction", "aggregator", "final_accuracy", "convergence_round"])
        writer.writerows(rows)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
