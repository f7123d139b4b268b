"""Experiment harness: configuration, sweeps, and deterministic output.

Three shipped experiments:

* ``interop``: operator-count sweep comparing subcarrier-gain sharing
  against fragmentation sharing under overload;
* ``diversity``: user-count sweep at a fixed operator count, tracking the
  gap between the two sharing schemes;
* ``intraop``: power-budget sweep comparing branch-and-bound against the
  exhaustive oracle on small single-operator instances.

Every work unit derives its RNG stream from
``SeedSequence([master_seed, experiment_id, sweep_index, trial])``; the
first generated 64-bit word seeds the channel draw, the second any
contention draw.  Trials are independent and may run on a worker pool;
rows are sorted by (sweep point, trial, scheme) before writing, so output
bytes depend only on the configuration and master seed.  Wall times are
recorded only when timing is requested, because measured times would
break byte-level reproducibility.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .channel import (ChannelProfile, ChannelRealization, DEFAULT_POWER_PROFILE_DB,
                      GridSpec, build_grid, sample_channel)
from .interop import (ActivePriorities, Allocation, DemandReport, FragmentationError,
                      SharingPolicy, active_priorities, allocate_fragments,
                      allocate_subcarrier_gain, compute_demand, operator_throughput)
from .intraop import (InfeasibleProblem, build_instance, branch_and_bound, linearize,
                      oracle_exhaustive)

EXPERIMENT_IDS = {"interop": 1, "diversity": 2, "intraop": 3}


class ConfigError(ValueError):
    """Invalid or missing configuration; the message names the field."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def default_config() -> dict:
    """The canonical configuration: every experiment's shipped defaults."""
    return {
        "grid": {
            "total_bandwidth_hz": 10e6,
            "n_subcarriers": 512,
            "segments": None,
        },
        "profile": {
            "n_paths": 6,
            "decay_factor": 1.0,
            "max_delay_spread_s": 5e-6,
            "max_doppler_hz": 30.0,
            "noise_psd_w_per_hz": 1e-20,
            "relative_powers_db": list(DEFAULT_POWER_PROFILE_DB),
        },
        "policy": {
            "rho": "equal",
            "alpha_pref": None,
            "min_fragment_subcarriers": 1,
        },
        "demand": "overloaded",
        "p_max_w": 4.0,
        "trials": 100,
        "master_seed": 12345,
        "workers": 1,
        "interop": {
            "operator_counts": [2, 3, 4, 5, 6],
            "users_per_operator": 10,
        },
        "diversity": {
            "n_operators": 3,
            "users_sweep": [1, 2, 4, 8, 16, 32, 64, 128, 170],
        },
        "intraop": {
            "n_users": 4,
            "n_ndc_users": 2,
            "n_subcarriers": 8,
            "dc_targets": [1.4, 1.6],
            "p_max_sweep_w": [1.0, 2.0, 4.0, 8.0, 16.0],
            "instances": 20,
        },
    }


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    grid: GridSpec
    profile: ChannelProfile
    rho: Union[str, tuple[float, ...]]
    alpha_pref: Optional[tuple[Optional[int], ...]]
    min_fragment_subcarriers: Union[int, tuple[int, ...]]
    demand: Union[str, tuple[int, ...], dict]
    p_max_w: float
    trials: int
    master_seed: int
    workers: int
    interop_operator_counts: tuple[int, ...]
    interop_users_per_operator: int
    diversity_n_operators: int
    diversity_users_sweep: tuple[int, ...]
    intraop_n_users: int
    intraop_n_ndc_users: int
    intraop_n_subcarriers: int
    intraop_dc_targets: tuple[float, ...]
    intraop_p_max_sweep_w: tuple[float, ...]
    intraop_instances: int

    def policy_for(self, n_operators: int) -> SharingPolicy:
        if self.rho == "equal":
            rho = (1.0 / n_operators,) * n_operators
        else:
            rho = tuple(self.rho)
            if len(rho) != n_operators:
                raise ConfigError(
                    f"policy.rho: {len(rho)} weights given for {n_operators} operators"
                )
        alpha = self.alpha_pref
        if alpha is not None and len(alpha) != n_operators:
            raise ConfigError(
                f"policy.alpha_pref: {len(alpha)} codes given for {n_operators} operators"
            )
        if isinstance(self.min_fragment_subcarriers, int):
            min_frag = (self.min_fragment_subcarriers,) * n_operators
        else:
            min_frag = tuple(self.min_fragment_subcarriers)
            if len(min_frag) != n_operators:
                raise ConfigError(
                    "policy.min_fragment_subcarriers: length does not match operators"
                )
        return SharingPolicy(rho=rho, alpha_pref=alpha,
                             min_fragment_subcarriers=min_frag)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"{where}: unknown configuration key")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _require(cond: bool, field_name: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{field_name}: {message}")


def load_config(source: Union[str, Path, dict, None] = None) -> ExperimentConfig:
    """Load and validate a configuration.

    ``source`` may be a JSON file path, an already-parsed dict, or ``None``
    for the shipped defaults.  User values overlay the defaults; unknown
    keys are rejected with the offending field in the message.
    """
    if source is None:
        raw = {}
    elif isinstance(source, dict):
        raw = source
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
    merged = _merge(default_config(), raw)

    g = merged["grid"]
    _require(isinstance(g["n_subcarriers"], int) and g["n_subcarriers"] >= 1,
             "grid.n_subcarriers", "must be an integer >= 1")
    try:
        grid = build_grid(g["total_bandwidth_hz"], g["n_subcarriers"],
                          g["segments"])
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc

    p = merged["profile"]
    try:
        rel = p["relative_powers_db"]
        profile = ChannelProfile(
            n_paths=int(p["n_paths"]),
            decay_factor=float(p["decay_factor"]),
            max_delay_spread_s=float(p["max_delay_spread_s"]),
            max_doppler_hz=float(p["max_doppler_hz"]),
            noise_psd_w_per_hz=float(p["noise_psd_w_per_hz"]),
            relative_powers_db=tuple(rel) if rel is not None else None,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"profile: {exc}") from exc

    pol = merged["policy"]
    rho = pol["rho"]
    if rho != "equal":
        _require(isinstance(rho, (list, tuple)) and len(rho) > 0,
                 "policy.rho", "must be 'equal' or a list of weights")
        rho = tuple(float(r) for r in rho)
    alpha = pol["alpha_pref"]
    if alpha is not None:
        _require(isinstance(alpha, (list, tuple)), "policy.alpha_pref",
                 "must be null or a list of 0/1/null codes")
        _require(all(a in (None, 0, 1) for a in alpha), "policy.alpha_pref",
                 "codes must be 0 (low end), 1 (high end) or null")
        alpha = tuple(alpha)
    min_frag = pol["min_fragment_subcarriers"]
    if isinstance(min_frag, list):
        min_frag = tuple(int(m) for m in min_frag)
        _require(all(m >= 1 for m in min_frag), "policy.min_fragment_subcarriers",
                 "must be >= 1")
    else:
        _require(isinstance(min_frag, int) and min_frag >= 1,
                 "policy.min_fragment_subcarriers", "must be an integer >= 1")

    demand = merged["demand"]
    if isinstance(demand, list):
        demand = tuple(int(d) for d in demand)
        _require(all(d >= 0 for d in demand), "demand", "demands must be >= 0")
    elif isinstance(demand, dict):
        _require(set(demand) == {"rate_target"}, "demand",
                 "object form must be {'rate_target': <bits>}")
        _require(float(demand["rate_target"]) >= 0, "demand.rate_target", "must be >= 0")
    else:
        _require(demand == "overloaded", "demand",
                 "must be 'overloaded', a demand list, or {'rate_target': <bits>}")

    _require(float(merged["p_max_w"]) > 0, "p_max_w", "must be positive")
    _require(isinstance(merged["trials"], int) and merged["trials"] >= 1,
             "trials", "must be an integer >= 1")
    _require(isinstance(merged["master_seed"], int) and merged["master_seed"] >= 0,
             "master_seed", "must be a non-negative integer")
    _require(isinstance(merged["workers"], int) and merged["workers"] >= 1,
             "workers", "must be an integer >= 1")

    io = merged["interop"]
    counts = tuple(int(n) for n in io["operator_counts"])
    _require(len(counts) > 0 and all(n >= 1 for n in counts),
             "interop.operator_counts", "must list operator counts >= 1")
    _require(int(io["users_per_operator"]) >= 1,
             "interop.users_per_operator", "must be >= 1")

    dv = merged["diversity"]
    _require(int(dv["n_operators"]) >= 1, "diversity.n_operators", "must be >= 1")
    sweep = tuple(int(u) for u in dv["users_sweep"])
    _require(len(sweep) > 0 and all(u >= 1 for u in sweep),
             "diversity.users_sweep", "must list user counts >= 1")

    ia = merged["intraop"]
    _require(int(ia["n_users"]) >= 1, "intraop.n_users", "must be >= 1")
    _require(1 <= int(ia["n_ndc_users"]) <= int(ia["n_users"]),
             "intraop.n_ndc_users", "must be in [1, n_users]")
    _require(int(ia["n_subcarriers"]) >= 1, "intraop.n_subcarriers", "must be >= 1")
    targets = tuple(float(t) for t in ia["dc_targets"])
    _require(len(targets) == int(ia["n_users"]) - int(ia["n_ndc_users"]),
             "intraop.dc_targets", "must list one target per delay-constrained user")
    _require(all(t >= 0 for t in targets), "intraop.dc_targets", "must be >= 0")
    p_sweep = tuple(float(x) for x in ia["p_max_sweep_w"])
    _require(len(p_sweep) > 0 and all(x > 0 for x in p_sweep),
             "intraop.p_max_sweep_w", "must list positive budgets")
    _require(int(ia["instances"]) >= 1, "intraop.instances", "must be >= 1")

    return ExperimentConfig(
        grid=grid,
        profile=profile,
        rho=rho,
        alpha_pref=alpha,
        min_fragment_subcarriers=min_frag,
        demand=demand,
        p_max_w=float(merged["p_max_w"]),
        trials=int(merged["trials"]),
        master_seed=int(merged["master_seed"]),
        workers=int(merged["workers"]),
        interop_operator_counts=counts,
        interop_users_per_operator=int(io["users_per_operator"]),
        diversity_n_operators=int(dv["n_operators"]),
        diversity_users_sweep=sweep,
        intraop_n_users=int(ia["n_users"]),
        intraop_n_ndc_users=int(ia["n_ndc_users"]),
        intraop_n_subcarriers=int(ia["n_subcarriers"]),
        intraop_dc_targets=targets,
        intraop_p_max_sweep_w=p_sweep,
        intraop_instances=int(ia["instances"]),
    )


def trial_seeds(master_seed: int, experiment: str, sweep_index: int,
                trial: int) -> tuple[int, int]:
    """(channel_seed, contention_seed) for one work unit; see module docs."""
    ss = np.random.SeedSequence(
        [master_seed, EXPERIMENT_IDS[experiment], sweep_index, trial]
    )
    words = ss.generate_state(2, dtype=np.uint64)
    return int(words[0]), int(words[1])


# ---------------------------------------------------------------------------
# Result rows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SharingRow:
    """One scheme's outcome for one (sweep point, trial)."""

    experiment: str
    n_operators: int
    users_per_operator: int
    trial: int
    seed: int
    scheme: str
    throughput_bps_hz: Optional[float]
    gap_bps_hz: Optional[float]
    status: str
    wall_time_s: Optional[float]


@dataclass(frozen=True)
class IntraRow:
    """One solver's outcome for one (instance, power budget)."""

    experiment: str
    instance: int
    p_max_w: float
    seed: int
    solver: str
    objective_bits: Optional[float]
    gap_rel: Optional[float]
    status: str
    nodes: int
    wall_time_s: Optional[float]


def write_rows(rows: Sequence, path: Union[str, Path], fmt: str = "csv") -> None:
    """Write result rows as CSV or JSON; ``None`` fields serialize empty/null."""
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    names = [f.name for f in fields(rows[0])]
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for row in rows:
                record = asdict(row)
                writer.writerow(["" if record[n] is None else record[n] for n in names])
    elif fmt == "json":
        payload = [asdict(row) for row in rows]
        path.write_text(json.dumps(payload, indent=2) + "\n")
    else:
        raise ValueError(f"unknown output format: {fmt}")


# ---------------------------------------------------------------------------
# Sharing-scheme experiments
# ---------------------------------------------------------------------------

def _demand_for(cfg: ExperimentConfig, ch: ChannelRealization,
                n_operators: int) -> DemandReport:
    n_sub = cfg.grid.n_subcarriers
    avg_snr = tuple(float(np.mean(g)) for g in ch.gains)
    p_max = (cfg.p_max_w,) * n_operators
    if cfg.demand == "overloaded":
        delta = (n_sub,) * n_operators
    elif isinstance(cfg.demand, tuple):
        if len(cfg.demand) != n_operators:
            raise ConfigError(
                f"demand: {len(cfg.demand)} entries given for {n_operators} operators"
            )
        delta = cfg.demand
    else:
        target = float(cfg.demand["rate_target"])
        delta = tuple(
            compute_demand(target, cfg.p_max_w, avg_snr[n], n_sub)
            for n in range(n_operators)
        )
    return DemandReport(delta=delta, avg_snr=avg_snr, p_max=p_max)


def _sharing_trial(args) -> list[SharingRow]:
    (experiment, cfg, n_operators, users, sweep_index, trial, timing) = args
    channel_seed, contention_seed = trial_seeds(
        cfg.master_seed, experiment, sweep_index, trial
    )
    policy = cfg.policy_for(n_operators)
    ch = sample_channel(cfg.grid, cfg.profile, (users,) * n_operators, channel_seed)
    demand = _demand_for(cfg, ch, n_operators)
    act = active_priorities(policy, demand, cfg.grid.n_subcarriers)

    def run(scheme: str):
        t0 = time.perf_counter()
        if scheme == "subcarrier_gain":
            alloc = allocate_subcarrier_gain(ch, act)
        else:
            alloc = allocate_fragments(act, policy, cfg.grid, contention_seed,
                                       contention_memory={})
        _, total = operator_throughput(alloc, ch, cfg.p_max_w)
        return total, (time.perf_counter() - t0 if timing else None)

    rows = []
    results: dict[str, Optional[float]] = {}
    status: dict[str, str] = {}
    walls: dict[str, Optional[float]] = {}
    for scheme in ("subcarrier_gain", "fragmentation"):
        try:
            total, wall = run(scheme)
            results[scheme] = total
            status[scheme] = "ok"
            walls[scheme] = wall
        except FragmentationError:
            results[scheme] = None
            status[scheme] = "infeasible_fragmentation"
            walls[scheme] = None
    both_ok = all(v is not None for v in results.values())
    gap = (results["subcarrier_gain"] - results["fragmentation"]) if both_ok else None
    for scheme in ("subcarrier_gain", "fragmentation"):
        rows.append(SharingRow(
            experiment=experiment, n_operators=n_operators,
            users_per_operator=users, trial=trial, seed=channel_seed,
            scheme=scheme, throughput_bps_hz=results[scheme], gap_bps_hz=gap,
            status=status[scheme], wall_time_s=walls[scheme],
        ))
    return rows


def _run_units(units, worker, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, units))
    return [worker(u) for u in units]


def run_interop_sweep(cfg: ExperimentConfig, timing: bool = False) -> list[SharingRow]:
    """Operator-count sweep: both sharing schemes on identical channels."""
    units = [
        ("interop", cfg, n_ops, cfg.interop_users_per_operator, si, trial, timing)
        for si, n_ops in enumerate(cfg.interop_operator_counts)
        for trial in range(cfg.trials)
    ]
    nested = _run_units(units, _sharing_trial, cfg.workers)
    rows = [row for batch in nested for row in batch]
    rows.sort(key=lambda r: (r.n_operators, r.trial, r.scheme))
    return rows


def run_diversity_sweep(cfg: ExperimentConfig, timing: bool = False) -> list[SharingRow]:
    """User-count sweep at a fixed operator count."""
    units = [
        ("diversity", cfg, cfg.diversity_n_operators, users, si, trial, timing)
        for si, users in enumerate(cfg.diversity_users_sweep)
        for trial in range(cfg.trials)
    ]
    nested = _run_units(units, _sharing_trial, cfg.workers)
    rows = [row for batch in nested for row in batch]
    rows.sort(key=lambda r: (r.users_per_operator, r.trial, r.scheme))
    return rows


# ---------------------------------------------------------------------------
# Allocation-solver experiment
# ---------------------------------------------------------------------------

def _intraop_unit(args) -> list[IntraRow]:
    (cfg, instance_index, timing) = args
    channel_seed, _ = trial_seeds(cfg.master_seed, "intraop", instance_index, 0)
    spacing = cfg.grid.subcarrier_spacing_hz
    L = cfg.intraop_n_subcarriers
    small_grid = build_grid(L * spacing, L)
    ch = sample_channel(small_grid, cfg.profile, (cfg.intraop_n_users,), channel_seed)
    gains = ch.gains[0]

    rows = []
    for p_max in cfg.intraop_p_max_sweep_w:
        inst = build_instance(gains, cfg.intraop_n_ndc_users,
                              cfg.intraop_dc_targets, p_max)
        outcomes = {}
        for solver_name, solve in (
            ("oracle", lambda: oracle_exhaustive(inst)),
            ("bnb", lambda: branch_and_bound(linearize(inst))),
        ):
            t0 = time.perf_counter()
            try:
                sol = solve()
                outcomes[solver_name] = ("ok", sol.objective, sol.stats.nodes,
                                         time.perf_counter() - t0 if timing else None)
            except InfeasibleProblem:
                outcomes[solver_name] = ("infeasible", None, 0,
                                         time.perf_counter() - t0 if timing else None)
        o_status, o_obj, o_nodes, o_wall = outcomes["oracle"]
        b_status, b_obj, b_nodes, b_wall = outcomes["bnb"]
        gap = None
        if o_obj is not None and b_obj is not None:
            gap = (o_obj - b_obj) / max(abs(o_obj), 1e-12)
        rows.append(IntraRow("intraop", instance_index, p_max, channel_seed,
                             "oracle", o_obj, gap, o_status, o_nodes, o_wall))
        rows.append(IntraRow("intraop", instance_index, p_max, channel_seed,
                             "bnb", b_obj, gap, b_status, b_nodes, b_wall))
    return rows


def run_intraop_experiment(cfg: ExperimentConfig, timing: bool = False) -> list[IntraRow]:
    """Power-budget sweep cross-checking branch-and-bound against the oracle."""
    units = [(cfg, idx, timing) for idx in range(cfg.intraop_instances)]
    nested = _run_units(units, _intraop_unit, cfg.workers)
    rows = [row for batch in nested for row in batch]
    rows.sort(key=lambda r: (r.instance, r.p_max_w, r.solver))
    return rows
