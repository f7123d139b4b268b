"""Config validation, seed derivation, sweeps, and row serialization."""

import csv
import json

import numpy as np
import pytest

from specshare.harness import (
    ConfigError,
    default_config,
    load_config,
    run_interop_sweep,
    run_intraop_experiment,
    trial_seeds,
    write_rows,
)

SPACING = 10e6 / 512


def tiny_config(**overrides):
    """A seconds-scale configuration for sweep tests."""
    raw = {
        "grid": {"total_bandwidth_hz": 32 * SPACING, "n_subcarriers": 32},
        "trials": 2,
        "interop": {"operator_counts": [2, 3], "users_per_operator": 2},
        "intraop": {
            "n_users": 3, "n_ndc_users": 2, "n_subcarriers": 4,
            "dc_targets": [1.0], "p_max_sweep_w": [2.0, 4.0], "instances": 2,
        },
    }
    raw.update(overrides)
    return load_config(raw)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def test_defaults_load_clean():
    cfg = load_config()
    assert cfg.grid.n_subcarriers == 512
    assert cfg.grid.subcarrier_spacing_hz == pytest.approx(19531.25)
    assert cfg.profile.n_paths == 6
    assert cfg.p_max_w == 4.0
    assert cfg.trials == 100
    assert cfg.interop_operator_counts == (2, 3, 4, 5, 6)
    assert cfg.intraop_dc_targets == (1.4, 1.6)
    assert cfg.demand == "overloaded"


def test_default_config_is_json_clean():
    json.dumps(default_config())


def test_unknown_keys_are_named():
    with pytest.raises(ConfigError, match="bogus"):
        load_config({"bogus": 1})
    with pytest.raises(ConfigError, match="interop.bogus"):
        load_config({"interop": {"bogus": 1}})


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"trials": 0}, "trials"),
        ({"trials": "many"}, "trials"),
        ({"p_max_w": -1.0}, "p_max_w"),
        ({"master_seed": -3}, "master_seed"),
        ({"workers": 0}, "workers"),
        ({"grid": {"n_subcarriers": 0}}, "grid.n_subcarriers"),
        ({"policy": {"rho": []}}, "policy.rho"),
        ({"policy": {"alpha_pref": [0, 2]}}, "policy.alpha_pref"),
        ({"policy": {"min_fragment_subcarriers": 0}}, "policy.min_fragment_subcarriers"),
        ({"demand": "sometimes"}, "demand"),
        ({"interop": {"operator_counts": []}}, "interop.operator_counts"),
        ({"diversity": {"users_sweep": [0]}}, "diversity.users_sweep"),
        ({"intraop": {"n_ndc_users": 9}}, "intraop.n_ndc_users"),
        ({"intraop": {"dc_targets": [1.0]}}, "intraop.dc_targets"),
        ({"intraop": {"p_max_sweep_w": []}}, "intraop.p_max_sweep_w"),
    ],
)
def test_field_validation_names_the_field(raw, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        load_config(raw)


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"trials": 7, "master_seed": 99}))
    cfg = load_config(path)
    assert cfg.trials == 7
    assert cfg.master_seed == 99


def test_missing_and_malformed_config_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(bad)
    array = tmp_path / "array.json"
    array.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="object"):
        load_config(array)


def test_policy_for_expands_shorthand():
    cfg = tiny_config()
    policy = cfg.policy_for(3)
    assert policy.rho == pytest.approx((1 / 3, 1 / 3, 1 / 3))
    assert policy.min_fragment_subcarriers == (1, 1, 1)
    explicit = tiny_config(policy={"rho": [0.25, 0.75], "alpha_pref": None,
                                    "min_fragment_subcarriers": 1})
    assert explicit.policy_for(2).rho == (0.25, 0.75)
    with pytest.raises(ConfigError, match="rho"):
        explicit.policy_for(3)


# ---------------------------------------------------------------------------
# Seed derivation
# ---------------------------------------------------------------------------

def test_trial_seeds_follow_documented_scheme():
    channel, contention = trial_seeds(12345, "interop", 2, 17)
    ss = np.random.SeedSequence([12345, 1, 2, 17])
    words = ss.generate_state(2, dtype=np.uint64)
    assert (channel, contention) == (int(words[0]), int(words[1]))


def test_trial_seeds_distinct_across_axes():
    seeds = {
        trial_seeds(1, exp, si, t)
        for exp in ("interop", "diversity", "intraop")
        for si in range(3)
        for t in range(3)
    }
    assert len(seeds) == 27


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def test_interop_sweep_rows_are_deterministic_and_sorted():
    cfg = tiny_config()
    rows = run_interop_sweep(cfg)
    again = run_interop_sweep(cfg)
    assert rows == again
    assert len(rows) == 2 * 2 * 2  # sweep points x trials x schemes
    keys = [(r.n_operators, r.trial, r.scheme) for r in rows]
    assert keys == sorted(keys)
    assert all(r.wall_time_s is None for r in rows)
    assert all(r.status == "ok" for r in rows)


def test_interop_schemes_share_channels_and_gap():
    rows = run_interop_sweep(tiny_config())
    by_trial = {}
    for r in rows:
        by_trial.setdefault((r.n_operators, r.trial), []).append(r)
    for pair in by_trial.values():
        a, b = pair
        assert a.seed == b.seed
        assert a.gap_bps_hz == b.gap_bps_hz
        sub = next(r for r in pair if r.scheme == "subcarrier_gain")
        frag = next(r for r in pair if r.scheme == "fragmentation")
        assert sub.gap_bps_hz == pytest.approx(
            sub.throughput_bps_hz - frag.throughput_bps_hz
        )


def test_single_operator_gap_is_zero():
    cfg = tiny_config(interop={"operator_counts": [1], "users_per_operator": 2})
    rows = run_interop_sweep(cfg)
    assert all(r.gap_bps_hz == pytest.approx(0.0, abs=1e-12) for r in rows)


def test_interop_sweep_records_timing_on_request():
    cfg = tiny_config(trials=1, interop={"operator_counts": [2],
                                         "users_per_operator": 2})
    rows = run_interop_sweep(cfg, timing=True)
    assert all(r.wall_time_s is not None and r.wall_time_s >= 0 for r in rows)


def test_intraop_experiment_pairs_solvers():
    cfg = tiny_config()
    rows = run_intraop_experiment(cfg)
    assert len(rows) == 2 * 2 * 2  # instances x budgets x solvers
    for i in range(0, len(rows), 2):
        bnb, oracle = rows[i], rows[i + 1]
        assert {bnb.solver, oracle.solver} == {"bnb", "oracle"}
        assert bnb.instance == oracle.instance
        assert bnb.p_max_w == oracle.p_max_w
        assert bnb.status == oracle.status == "ok"
        assert bnb.gap_rel == oracle.gap_rel
        assert abs(bnb.gap_rel) <= 1e-8
        assert bnb.objective_bits <= oracle.objective_bits + 1e-6


def test_intraop_experiment_is_deterministic():
    cfg = tiny_config()
    assert run_intraop_experiment(cfg) == run_intraop_experiment(cfg)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def test_write_rows_csv(tmp_path):
    rows = run_interop_sweep(tiny_config(trials=1))
    out = tmp_path / "rows.csv"
    write_rows(rows, out, fmt="csv")
    with out.open() as fh:
        records = list(csv.DictReader(fh))
    assert len(records) == len(rows)
    assert records[0]["experiment"] == "interop"
    assert records[0]["scheme"] == "fragmentation"
    # None serializes as an empty CSV field.
    assert all(rec["wall_time_s"] == "" for rec in records)


def test_write_rows_json(tmp_path):
    rows = run_interop_sweep(tiny_config(trials=1))
    out = tmp_path / "rows.json"
    write_rows(rows, out, fmt="json")
    payload = json.loads(out.read_text())
    assert len(payload) == len(rows)
    assert payload[0]["wall_time_s"] is None
    assert payload[0]["n_operators"] == 2


def test_write_rows_rejects_bad_calls(tmp_path):
    rows = run_interop_sweep(tiny_config(trials=1))
    with pytest.raises(ValueError):
        write_rows([], tmp_path / "x.csv")
    with pytest.raises(ValueError, match="format"):
        write_rows(rows, tmp_path / "x.xml", fmt="xml")
