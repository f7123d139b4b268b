"""Command-line entry points.

``specshare interop|diversity|intraop`` run the shipped experiments and
write CSV or JSON rows.  ``specshare solve`` solves one allocation
instance from a JSON file; ``specshare check`` re-verifies a solution
file from scratch.  Exit codes: 0 success, 1 infeasible instance or
failed check, 2 invalid configuration or arguments.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .harness import (ConfigError, load_config, run_diversity_sweep,
                      run_interop_sweep, run_intraop_experiment, write_rows)
from .intraop import (InfeasibleProblem, SolverError, branch_and_bound,
                      build_instance, check_solution, linearize, make_solution)


def _add_sweep_arguments(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file (defaults apply otherwise)")
    sub.add_argument("--seed", type=int, help="override the master seed")
    sub.add_argument("--trials", type=int, help="override the trial count")
    sub.add_argument("--workers", type=int, help="worker process count")
    sub.add_argument("--out", required=True, help="output file path")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")
    sub.add_argument("--timing", action="store_true",
                     help="record wall times (breaks byte-level reproducibility)")


def _load_sweep_config(args):
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.workers is not None:
        overrides["workers"] = args.workers
    cfg_source = args.config
    if overrides:
        if cfg_source is None:
            raw = {}
        else:
            path = Path(cfg_source)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            try:
                raw = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise ConfigError("config root must be a JSON object")
        raw.update(overrides)
        return load_config(raw)
    return load_config(cfg_source)


def _read_instance(path: str):
    file = Path(path)
    if not file.exists():
        raise ConfigError(f"instance file not found: {file}")
    try:
        data = json.loads(file.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"instance file is not valid JSON: {exc}") from exc
    for key in ("gains", "n_ndc_users", "dc_targets", "p_max_w"):
        if key not in data:
            raise ConfigError(f"instance file is missing '{key}'")
    try:
        return build_instance(np.asarray(data["gains"], dtype=float),
                              int(data["n_ndc_users"]),
                              [float(t) for t in data["dc_targets"]],
                              float(data["p_max_w"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"instance: {exc}") from exc


def _instance_payload(inst) -> dict:
    return {
        "gains": np.asarray(inst.gains).tolist(),
        "n_ndc_users": inst.n_ndc_users,
        "dc_targets": list(inst.dc_targets),
        "p_max_w": inst.p_max,
    }


def _cmd_solve(args) -> int:
    inst = _read_instance(args.config)
    trace = None
    if args.trace:
        def trace(node_id, bound_bits, incumbent):
            inc = "" if incumbent is None else repr(incumbent)
            print(f"{node_id},{bound_bits!r},{inc}", file=sys.stderr)
    try:
        sol = branch_and_bound(linearize(inst), trace=trace)
    except InfeasibleProblem as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    payload = {
        "instance": _instance_payload(inst),
        "assignment": np.asarray(sol.c).astype(int).tolist(),
        "powers_w": np.asarray(sol.p).tolist(),
        "objective_bits": sol.objective,
        "stats": {
            "nodes": sol.stats.nodes,
            "relaxation_iterations": sol.stats.relaxation_iterations,
        },
    }
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    print(f"objective {sol.objective!r} bits after {sol.stats.nodes} nodes")
    return 0


def _cmd_check(args) -> int:
    file = Path(args.solution)
    if not file.exists():
        raise ConfigError(f"solution file not found: {file}")
    try:
        data = json.loads(file.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"solution file is not valid JSON: {exc}") from exc
    for key in ("instance", "assignment", "powers_w"):
        if key not in data:
            raise ConfigError(f"solution file is missing '{key}'")
    meta = data["instance"]
    try:
        inst = build_instance(np.asarray(meta["gains"], dtype=float),
                              int(meta["n_ndc_users"]),
                              [float(t) for t in meta["dc_targets"]],
                              float(meta["p_max_w"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"solution instance: {exc}") from exc
    sol = make_solution(inst, np.asarray(data["assignment"], dtype=float),
                        np.asarray(data["powers_w"], dtype=float))
    report = check_solution(sol, inst)
    print(report)
    return 0 if report.passed() else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="specshare",
        description="Shared-spectrum sharing schemes and delay-constrained "
                    "resource allocation",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("interop", "operator-count sweep of both sharing schemes"),
        ("diversity", "user-count sweep of both sharing schemes"),
        ("intraop", "power-budget sweep of branch-and-bound vs oracle"),
    ):
        sub = subs.add_parser(name, help=help_text)
        _add_sweep_arguments(sub)

    solve = subs.add_parser("solve", help="solve one allocation instance")
    solve.add_argument("--config", required=True, help="instance JSON file")
    solve.add_argument("--out", required=True, help="solution JSON output path")
    solve.add_argument("--trace", action="store_true",
                       help="print 'node,bound,incumbent' lines to stderr")

    check = subs.add_parser("check", help="re-verify a solution file")
    check.add_argument("solution", help="solution JSON from 'solve'")

    args = parser.parse_args(argv)
    runners = {
        "interop": run_interop_sweep,
        "diversity": run_diversity_sweep,
        "intraop": run_intraop_experiment,
    }
    try:
        if args.command in runners:
            cfg = _load_sweep_config(args)
            rows = runners[args.command](cfg, timing=args.timing)
            write_rows(rows, args.out, args.format)
            print(f"wrote {len(rows)} rows to {args.out}")
            return 0
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "check":
            return _cmd_check(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
