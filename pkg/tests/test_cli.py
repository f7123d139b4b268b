"""End-to-end command-line behavior, exercised in-process via ``main``."""

import csv
import json
import math

import pytest

from specshare.cli import main

SPACING = 10e6 / 512

TINY_SWEEP = {
    "grid": {"total_bandwidth_hz": 32 * SPACING, "n_subcarriers": 32},
    "trials": 2,
    "interop": {"operator_counts": [2, 3], "users_per_operator": 2},
    "diversity": {"n_operators": 2, "users_sweep": [1, 2]},
    "intraop": {
        "n_users": 3, "n_ndc_users": 2, "n_subcarriers": 4,
        "dc_targets": [1.0], "p_max_sweep_w": [2.0, 4.0], "instances": 2,
    },
}

# Closed-form instance: the no-floor user takes the gain-3 subcarrier at
# unit power for log2(1 + 3) bits while the floor user clears 2 bits.
HAND_INSTANCE = {
    "gains": [[1.0, 4.0], [3.0, 1.0]],
    "n_ndc_users": 1,
    "dc_targets": [1.0],
    "p_max_w": 2.0,
}


@pytest.fixture
def sweep_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY_SWEEP))
    return path


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "instance.json"
    path.write_text(json.dumps(HAND_INSTANCE))
    return path


# ---------------------------------------------------------------------------
# Sweep subcommands
# ---------------------------------------------------------------------------

def test_interop_writes_csv(tmp_path, sweep_config, capsys):
    out = tmp_path / "rows.csv"
    code = main(["interop", "--config", str(sweep_config), "--out", str(out)])
    assert code == 0
    assert "wrote 8 rows" in capsys.readouterr().out
    with out.open() as fh:
        records = list(csv.DictReader(fh))
    assert len(records) == 8
    assert records[0]["experiment"] == "interop"
    assert {r["scheme"] for r in records} == {"subcarrier_gain", "fragmentation"}


def test_diversity_writes_json(tmp_path, sweep_config):
    out = tmp_path / "rows.json"
    code = main(["diversity", "--config", str(sweep_config),
                 "--out", str(out), "--format", "json"])
    assert code == 0
    payload = json.loads(out.read_text())
    assert [r["users_per_operator"] for r in payload] == [1, 1, 1, 1, 2, 2, 2, 2]
    assert all(r["n_operators"] == 2 for r in payload)


def test_intraop_runs_tiny_sweep(tmp_path, sweep_config):
    out = tmp_path / "rows.csv"
    code = main(["intraop", "--config", str(sweep_config), "--out", str(out)])
    assert code == 0
    with out.open() as fh:
        records = list(csv.DictReader(fh))
    assert len(records) == 8
    assert {r["solver"] for r in records} == {"bnb", "oracle"}
    assert all(abs(float(r["gap_rel"])) <= 1e-6 for r in records)


def test_seed_override_changes_rows(tmp_path, sweep_config):
    base, reseeded = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["interop", "--config", str(sweep_config), "--out", str(base)])
    main(["interop", "--config", str(sweep_config), "--out", str(reseeded),
          "--seed", "777"])
    assert base.read_text() != reseeded.read_text()


def test_defaults_used_when_config_omitted(tmp_path):
    out = tmp_path / "rows.csv"
    code = main(["diversity", "--out", str(out), "--trials", "1"])
    # Full-grid run; just confirm it starts from defaults and completes.
    assert code == 0
    with out.open() as fh:
        records = list(csv.DictReader(fh))
    assert all(r["n_operators"] == "3" for r in records)
    assert all(r["trial"] == "0" for r in records)


def test_timing_flag_populates_wall_time(tmp_path, sweep_config):
    out = tmp_path / "rows.json"
    main(["interop", "--config", str(sweep_config), "--out", str(out),
          "--format", "json", "--timing"])
    assert all(r["wall_time_s"] is not None for r in json.loads(out.read_text()))


# ---------------------------------------------------------------------------
# Error paths
# ---------------------------------------------------------------------------

def test_missing_config_file_exits_2(tmp_path, capsys):
    out = tmp_path / "rows.csv"
    code = main(["interop", "--config", str(tmp_path / "nope.json"),
                 "--out", str(out)])
    assert code == 2
    assert "error:" in capsys.readouterr().err
    assert not out.exists()


def test_invalid_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"trials": -5}))
    code = main(["interop", "--config", str(cfg), "--out", str(tmp_path / "o.csv")])
    assert code == 2
    assert "trials" in capsys.readouterr().err


def test_unknown_flag_exits_2_with_usage(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["interop", "--frobnicate", "--out", "x.csv"])
    assert excinfo.value.code == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_missing_out_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["interop"])
    assert excinfo.value.code == 2
    assert "--out" in capsys.readouterr().err


def test_no_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


# ---------------------------------------------------------------------------
# solve / check round trip
# ---------------------------------------------------------------------------

def test_solve_then_check_round_trip(tmp_path, instance_file, capsys):
    out = tmp_path / "solution.json"
    code = main(["solve", "--config", str(instance_file), "--out", str(out)])
    assert code == 0
    assert "objective" in capsys.readouterr().out

    payload = json.loads(out.read_text())
    assert payload["objective_bits"] == pytest.approx(math.log2(5.0), abs=1e-9)
    assert payload["assignment"] == [[0, 1], [1, 0]]
    assert payload["powers_w"][0][1] == pytest.approx(1.0, abs=1e-9)
    assert payload["powers_w"][1][0] == pytest.approx(1.0, abs=1e-9)
    assert payload["stats"]["nodes"] >= 1
    assert payload["instance"] == HAND_INSTANCE

    code = main(["check", str(out)])
    assert code == 0
    assert "budget residual" in capsys.readouterr().out


def test_check_rejects_tampered_powers(tmp_path, instance_file, capsys):
    out = tmp_path / "solution.json"
    main(["solve", "--config", str(instance_file), "--out", str(out)])
    payload = json.loads(out.read_text())
    payload["powers_w"] = [[10 * p for p in row] for row in payload["powers_w"]]
    out.write_text(json.dumps(payload))
    capsys.readouterr()
    assert main(["check", str(out)]) == 1


def test_check_rejects_missing_key(tmp_path, instance_file, capsys):
    out = tmp_path / "solution.json"
    main(["solve", "--config", str(instance_file), "--out", str(out)])
    payload = json.loads(out.read_text())
    del payload["powers_w"]
    out.write_text(json.dumps(payload))
    code = main(["check", str(out)])
    assert code == 2
    assert "powers_w" in capsys.readouterr().err


def test_solve_infeasible_exits_1(tmp_path, capsys):
    starved = dict(HAND_INSTANCE, p_max_w=0.0)
    inst = tmp_path / "starved.json"
    inst.write_text(json.dumps(starved))
    out = tmp_path / "solution.json"
    code = main(["solve", "--config", str(inst), "--out", str(out)])
    assert code == 1
    assert "infeasible" in capsys.readouterr().err
    assert not out.exists()


def test_solve_rejects_malformed_instance(tmp_path, capsys):
    broken = {k: v for k, v in HAND_INSTANCE.items() if k != "dc_targets"}
    inst = tmp_path / "broken.json"
    inst.write_text(json.dumps(broken))
    code = main(["solve", "--config", str(inst), "--out", str(tmp_path / "s.json")])
    assert code == 2
    assert "dc_targets" in capsys.readouterr().err


def test_solve_trace_emits_parsable_lines(tmp_path, instance_file, capsys):
    out = tmp_path / "solution.json"
    code = main(["solve", "--config", str(instance_file), "--out", str(out),
                 "--trace"])
    assert code == 0
    lines = [ln for ln in capsys.readouterr().err.splitlines() if ln]
    assert lines
    parsed = [ln.split(",") for ln in lines]
    assert all(len(parts) == 3 for parts in parsed)
    assert int(parsed[0][0]) == 0
    objective = json.loads(out.read_text())["objective_bits"]
    for node_id, bound, incumbent in parsed:
        int(node_id)
        assert float(bound) >= objective - 1e-9
        if incumbent:
            assert float(incumbent) <= objective + 1e-12
