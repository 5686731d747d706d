"""Command-line interface.

    pqfl run --scenario <file> --out <dir> [--seed N] [--mode M]
             [--aggregator A] [--workers W]
    pqfl verify-masking [--clients N] [--dim M] [--trials K] [--seed N]
    pqfl account-bytes --scenario <file>

Exit codes: 0 success, 2 configuration error, 3 property failure.
"""

from __future__ import annotations

import argparse
import copy
import sys

from .scenario import AGGREGATORS, MODES, ConfigError, load_scenario, scenario_from_dict
from .simulation import account_bytes, emit_metrics, run_experiment, verify_masking

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROPERTY = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pqfl",
        description="Byzantine-robust federated learning simulator with "
        "post-quantum secure aggregation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario and write metrics files")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--out", required=True)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--mode", choices=MODES, default=None)
    run_p.add_argument("--aggregator", choices=AGGREGATORS, default=None)
    run_p.add_argument("--workers", type=int, default=None)

    vm_p = sub.add_parser(
        "verify-masking", help="check mask cancellation and dropout recovery"
    )
    vm_p.add_argument("--clients", type=int, default=5)
    vm_p.add_argument("--dim", type=int, default=32)
    vm_p.add_argument("--trials", type=int, default=1000)
    vm_p.add_argument("--seed", type=int, default=0)

    ab_p = sub.add_parser(
        "account-bytes", help="per-client communication cost table"
    )
    ab_p.add_argument("--scenario", required=True)
    return parser


def _apply_overrides(cfg, args):
    doc = copy.deepcopy(cfg.raw)
    fed = dict(doc.get("federation", {}))
    if args.seed is not None:
        fed["seed"] = args.seed
    if args.mode is not None:
        fed["mode"] = args.mode
    if args.aggregator is not None:
        fed["aggregator"] = args.aggregator
    if args.workers is not None:
        fed["workers"] = args.workers
    doc["federation"] = fed
    return scenario_from_dict(doc)


def _cmd_run(args) -> int:
    cfg = load_scenario(args.scenario)
    cfg = _apply_overrides(cfg, args)
    result = run_experiment(cfg)
    files = emit_metrics(result, args.out)
    conv = result.convergence_round
    print(f"rounds: {len(result.rounds)}")
    print(f"final accuracy: {result.final_metrics.accuracy:.4f}")
    print(f"final f1: {result.final_metrics.f1:.4f}")
    print(f"convergence round: {conv if conv is not None else 'unreached'}")
    print(f"total epsilon: {result.total_epsilon}")
    for path in files:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_verify_masking(args) -> int:
    report = verify_masking(
        n_clients=args.clients, dim=args.dim, trials=args.trials, seed=args.seed
    )
    if report.passed:
        print(
            f"masking OK: {report.trials} trials, {report.clients} clients, "
            f"dim {report.dim}; cancellation and dropout recovery bit-exact"
        )
        return EXIT_OK
    for failure in report.failures[:10]:
        print(
            f"FAIL trial {failure['trial']} ({failure['check']}): "
            f"first bad coordinate {failure['coordinate']}"
        )
    print(f"{len(report.failures)} of {report.trials} trials failed")
    return EXIT_PROPERTY


def _cmd_account_bytes(args) -> int:
    cfg = load_scenario(args.scenario)
    table = account_bytes(cfg)
    print(f"parameters: {table.param_count}")
    print(f"{'component':<14}{'bytes/client/round':>20}  amortized")
    for name in ("model_down", "upload", "kem_pk", "kem_ct", "shares"):
        flag = "yes" if name in table.amortized_fields else "no"
        print(f"{name:<14}{getattr(table, name):>20}  {flag}")
    print(f"{'total':<14}{table.total:>20}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify-masking":
            return _cmd_verify_masking(args)
        if args.command == "account-bytes":
            return _cmd_account_bytes(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        # bad data files, unreadable paths, and similar setup problems
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
