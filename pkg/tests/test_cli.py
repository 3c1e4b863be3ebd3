"""Command-line interface tests."""

import json
from pathlib import Path

import numpy as np
import pytest

from geovar import cli

CONFIG_DIR = Path(__file__).parent.parent / "configs"
SE2_CONFIG = str(CONFIG_DIR / "se2_vehicle.json")
BALL_CONFIG = str(CONFIG_DIR / "ball_plate.json")
FRB_CONFIG = str(CONFIG_DIR / "free_rigid_body.json")


def write_config(tmp_path, table, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(table))
    return str(p)


def base_se2_table():
    return json.loads(Path(SE2_CONFIG).read_text())


# -- config validation -------------------------------------------------------


def test_missing_step_size_is_a_config_error(tmp_path, capsys):
    table = base_se2_table()
    del table["h"]
    code = cli.main(["solve", write_config(tmp_path, table)])
    assert code == 1
    assert "h" in capsys.readouterr().err


def test_unknown_model_is_a_config_error(tmp_path, capsys):
    table = base_se2_table()
    table["model"] = "pendulum"
    code = cli.main(["solve", write_config(tmp_path, table)])
    assert code == 1
    assert "model" in capsys.readouterr().err


def test_unreadable_config_is_a_config_error(tmp_path, capsys):
    code = cli.main(["solve", str(tmp_path / "missing.json")])
    assert code == 1
    assert "config" in capsys.readouterr().err


def test_too_few_nodes_rejected(tmp_path, capsys):
    table = base_se2_table()
    table["N"] = 4
    code = cli.main(["solve", write_config(tmp_path, table)])
    assert code == 1
    assert "N" in capsys.readouterr().err


# -- solve -------------------------------------------------------------------


def test_solve_vehicle_writes_outputs_and_converges(tmp_path):
    code = cli.main(["solve", SE2_CONFIG, "--out-dir", str(tmp_path)])
    assert code == 0
    traj = tmp_path / "trajectory.csv"
    diag_path = tmp_path / "diagnostics.json"
    assert traj.exists() and diag_path.exists()
    diag = json.loads(diag_path.read_text())
    assert diag["converged"] is True
    assert diag["counts"]["unknowns"] == diag["counts"]["equations"]
    assert diag["residual_inf_norm"] <= 1e-10
    assert diag["constraint_max_violation"] <= 1e-8
    assert diag["closure_inf_norm"] <= 1e-8
    # one row per node plus header; q1, three xi, two lam, nine g columns
    lines = traj.read_text().strip().split("\n")
    assert len(lines) == diag["N"] + 2
    header = lines[0].split(",")
    assert header == (
        ["t", "q1", "xi1", "xi2", "xi3", "lam1", "lam2"]
        + [f"g{i}{j}" for i in range(1, 4) for j in range(1, 4)]
    )
    # the final row carries no algebra node and no multiplier
    last = lines[-1].split(",")
    assert last[2:7] == [""] * 5


def test_solve_is_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["solve", SE2_CONFIG, "--out-dir", str(out1)]) == 0
    assert cli.main(["solve", SE2_CONFIG, "--out-dir", str(out2)]) == 0
    assert (out1 / "trajectory.csv").read_bytes() == (
        out2 / "trajectory.csv"
    ).read_bytes()


def test_solve_rigid_body_reports_conserved_quantities(tmp_path):
    code = cli.main(["solve", FRB_CONFIG, "--out-dir", str(tmp_path)])
    assert code == 0
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["momentum_drift"] <= 1e-8
    assert diag["energy_drift_max"] <= 1e-3


# -- oracle ------------------------------------------------------------------


@pytest.mark.parametrize("config", [SE2_CONFIG, BALL_CONFIG])
def test_oracle_passes_for_both_models(config, capsys, tmp_path):
    code = cli.main(["oracle", config, "--seed", "42", "--out-dir", str(tmp_path)])
    assert code == 0
    assert "pass" in capsys.readouterr().out


def test_oracle_negative_control_flags_the_flipped_block(capsys, tmp_path):
    code = cli.main(
        ["oracle", SE2_CONFIG, "--seed", "42", "--flip-block", "group",
         "--out-dir", str(tmp_path)]
    )
    assert code == 2
    assert "group-stationarity" in capsys.readouterr().out


def test_oracle_rejects_unconstrained_model(tmp_path, capsys):
    code = cli.main(["oracle", FRB_CONFIG, "--out-dir", str(tmp_path)])
    assert code == 1
    assert "model" in capsys.readouterr().err


# -- environment variables and precedence ------------------------------------


def test_env_variable_caps_iterations(tmp_path, monkeypatch):
    monkeypatch.setenv("GEOVAR_MAX_ITERS", "1")
    code = cli.main(["solve", SE2_CONFIG, "--out-dir", str(tmp_path)])
    assert code == 2
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["converged"] is False
    assert diag["iterations"] == 1
    # the best iterate is still written
    assert (tmp_path / "trajectory.csv").exists()


def test_flag_overrides_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("GEOVAR_MAX_ITERS", "1")
    code = cli.main(
        ["solve", SE2_CONFIG, "--out-dir", str(tmp_path), "--max-iters", "120"]
    )
    assert code == 0


def test_env_out_dir_is_honored(tmp_path, monkeypatch):
    monkeypatch.setenv("GEOVAR_OUT_DIR", str(tmp_path / "envout"))
    assert cli.main(["solve", FRB_CONFIG]) == 0
    assert (tmp_path / "envout" / "trajectory.csv").exists()


def test_bad_env_value_is_a_config_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GEOVAR_MAX_ITERS", "many")
    code = cli.main(["solve", SE2_CONFIG, "--out-dir", str(tmp_path)])
    assert code == 1
    assert "GEOVAR_MAX_ITERS" in capsys.readouterr().err


# -- convergence -------------------------------------------------------------


def test_convergence_needs_three_geometric_steps(tmp_path, capsys):
    code = cli.main(
        ["convergence", FRB_CONFIG, "--out-dir", str(tmp_path),
         "--h-list", "0.1", "0.05"]
    )
    assert code == 1
    assert "h-list" in capsys.readouterr().err
    code = cli.main(
        ["convergence", FRB_CONFIG, "--out-dir", str(tmp_path),
         "--h-list", "0.1", "0.05", "0.03"]
    )
    assert code == 1
    assert "geometric" in capsys.readouterr().err


def test_convergence_rigid_body_second_order(tmp_path, capsys):
    code = cli.main(
        ["convergence", FRB_CONFIG, "--out-dir", str(tmp_path),
         "--h-list", "0.08", "0.04", "0.02", "0.01"]
    )
    assert code == 0
    assert "fitted slope" in capsys.readouterr().out
    lines = (tmp_path / "convergence.csv").read_text().strip().split("\n")
    assert lines[0] == "h,error,slope"
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 4
    hs = [float(r[0]) for r in rows]
    assert hs == sorted(hs, reverse=True)
    slope = float(rows[0][2])
    assert abs(slope - 2.0) < 0.3
    # the finest run is its own reference
    assert float(rows[-1][1]) == 0.0
    # errors shrink monotonically over the compared runs
    errs = [float(r[1]) for r in rows[:-1]]
    assert errs == sorted(errs, reverse=True)
