#!/usr/bin/env python3
"""Per-client communication cost across wire modes and KEM suites.

Usage:
    python scripts/overhead_report.py [--clients 50] [--hidden 128 64 32]
                                      [--features 41]
"""

import argparse

from pqfl import account_bytes, scenario_from_dict


def build(clients: int, features: int, hidden, mode: str, kem: str):
    doc = {
        "federation": {
            "clients": clients, "rounds": 1, "cohort": min(20, clients),
            "mode": mode, "aggregator": "fedavg", "kem": kem,
        },
        "model": {"hidden": list(hidden)},
        "training": {"features": features, "samples": 4 * clients},
    }
    return scenario_from_dict(doc)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--clients", type=int, default=50)
    parser.add_argument("--features", type=int, default=41)
    parser.add_argument("--hidden", type=int, nargs="+", default=[128, 64, 32])
    args = parser.parse_args()

    configs = [
        ("plaintext", "mock"),
        ("masked", "mock"),
        ("masked", "ml-kem-1024"),
    ]
    print(f"{'mode':<11}{'kem':<13}{'down':>9}{'up':>9}{'kem_pk':>8}{'kem_ct':>8}{'shares':>9}{'total':>10}")
    for mode, kem in configs:
        cfg = build(args.clients, args.features, args.hidden, mode, kem)
        t = account_bytes(cfg)
        print(
            f"{mode:<11}{kem:<13}{t.model_down:>9}{t.upload:>9}"
            f"{t.kem_pk:>8}{t.kem_ct:>8}{t.shares:>9}{t.total:>10}"
        )
    print("(kem_pk, kem_ct, shares are setup-only and amortized across rounds)")


if __name__ == "__main__":
    main()
