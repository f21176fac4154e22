import csv
import io
import json

import numpy as np
import pytest
from click.testing import CliRunner

from singular_mfc import NonConvergence, cli

from conftest import BASELINE, PHI_BASE, SYMMETRIC


@pytest.fixture
def runner():
    return CliRunner()


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(path)


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_solve_symmetric(runner, tmp_path):
    res = runner.invoke(cli.main, ["solve", write(tmp_path, "s.json", {"model": SYMMETRIC})])
    assert res.exit_code == 0, res.output
    rep = json.loads(res.output)
    assert abs(rep["theta_star"]) < 1e-8 and abs(rep["lambda_star"]) < 1e-8
    assert abs(rep["a_plus"] + rep["a_minus"]) < 1e-8
    assert rep["extra_sign_changes"] == []


def test_solve_baseline_passes_checks_and_writes_file(runner, tmp_path):
    out = tmp_path / "eq.json"
    cfg = write(tmp_path, "f.json", {"model": BASELINE, "solver": {"tol": 1e-10}})
    res = runner.invoke(cli.main, ["solve", cfg, "-o", str(out)])
    assert res.exit_code == 0, res.output
    rep = json.loads(out.read_text())
    assert all(rep["checks"].values())
    for key in ("theta_star", "lambda_star", "a_plus", "a_minus", "kappa_star", "r_theta", "r_lambda",
                "v_prime", "iterations"):
        assert key in rep


@pytest.mark.parametrize(
    "config, needle",
    [
        ({"model": {**BASELINE, "phi": 2.0}}, "phi < rho"),
        ({"model": {**BASELINE, "delta": 0.0}}, "delta > 0"),
        ({"model": {**BASELINE, "extra": 1.0}}, "unknown parameter"),
        ({"model": BASELINE, "plots": {}}, "unknown config section"),
        ({"model": BASELINE, "sim": {"steps": 3}}, "unknown sim field"),
        ({"params": BASELINE}, "'model'"),
        ("{not json", "not valid JSON"),
    ],
)
def test_config_errors_exit_2(runner, tmp_path, config, needle):
    res = runner.invoke(cli.main, ["solve", write(tmp_path, "bad.json", config)])
    assert res.exit_code == 2
    assert needle in res.output


def test_missing_config_exit_2(runner, tmp_path):
    res = runner.invoke(cli.main, ["solve", str(tmp_path / "nope.json")])
    assert res.exit_code == 2


def test_numerical_failure_exit_3(runner, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise NonConvergence("forced", 1.0, 5)

    monkeypatch.setattr(cli, "solve_potential_mfg", boom)
    res = runner.invoke(cli.main, ["solve", write(tmp_path, "f.json", {"model": BASELINE})])
    assert res.exit_code == 3


def test_sweep_csv_layout_and_order(runner, tmp_path):
    cfg = write(tmp_path, "f.json", {"model": BASELINE})
    res = runner.invoke(cli.main, ["sweep", cfg, "--param", "delta", "--from", "0.1", "--to", "5", "--steps", "8"])
    assert res.exit_code == 0, res.output
    assert res.output.splitlines()[0] == "param,value,a_plus,a_minus,theta_star,lambda_star,kappa_star"
    assert "\r" not in res.output and res.output.endswith("\n")
    table = rows(res.output)
    values = [float(r["value"]) for r in table]
    assert values == sorted(values) and len(values) == 8
    gaps = [float(r["a_minus"]) - float(r["a_plus"]) for r in table]
    assert all(b > a for a, b in zip(gaps, gaps[1:]))


def test_sweep_parallel_matches_serial(runner, tmp_path):
    cfg = write(tmp_path, "f.json", {"model": BASELINE})
    args = ["sweep", cfg, "--param", "sigma", "--from", "0.1", "--to", "4", "--steps", "6"]
    serial = runner.invoke(cli.main, args)
    parallel = runner.invoke(cli.main, args + ["--workers", "2"])
    assert serial.exit_code == parallel.exit_code == 0
    assert serial.output == parallel.output


def test_sweep_spec_validation(runner, tmp_path):
    base = write(tmp_path, "phi.json", {"model": PHI_BASE})
    res = runner.invoke(cli.main, ["sweep", base, "--param", "phi", "--from", "0.1", "--to", "5", "--steps", "4"])
    assert res.exit_code == 2 and "phi < rho" in res.output
    res = runner.invoke(cli.main, ["sweep", base, "--param", "phi", "--from", "2", "--to", "1", "--steps", "4"])
    assert res.exit_code == 2
    res = runner.invoke(cli.main, ["sweep", base, "--param", "phi", "--from", "0.1", "--to", "1", "--steps", "1"])
    assert res.exit_code == 2
    res = runner.invoke(cli.main, ["sweep", base, "--param", "rho", "--from", "0.1", "--to", "1"])
    assert res.exit_code == 2


def test_sweep_status_column_and_exit_codes(runner, tmp_path, monkeypatch):
    real = cli.solve_potential_mfg
    failing = {0.5}

    def flaky(p, tol, scan):
        if p.delta in failing:
            raise NonConvergence("forced", 1.0, 1)
        return real(p, tol=tol, scan=scan)

    monkeypatch.setattr(cli, "solve_potential_mfg", flaky)
    cfg = write(tmp_path, "f.json", {"model": BASELINE})
    args = ["sweep", cfg, "--param", "delta", "--from", "0.5", "--to", "5", "--steps", "10"]
    res = runner.invoke(cli.main, args)
    assert res.exit_code == 0
    table = rows(res.stdout)
    assert table[0]["status"].startswith("NonConvergence") and table[1]["status"] == "ok"
    failing.update({1.0, 1.5})
    res = runner.invoke(cli.main, args)
    assert res.exit_code == 3


def test_profile_u_endpoints(runner, tmp_path):
    cfg = write(tmp_path, "f.json", {"model": BASELINE})
    res = runner.invoke(cli.main, ["profile", cfg, "--quantity", "U"])
    assert res.exit_code == 0
    table = rows(res.output)
    assert float(table[0]["U"]) == -1.0 and float(table[-1]["U"]) == 1.0


def test_profile_pdf_integrates_to_one(runner, tmp_path):
    cfg = write(tmp_path, "f.json", {"model": BASELINE})
    res = runner.invoke(cli.main, ["profile", cfg, "--quantity", "pdf"])
    table = rows(res.output)
    x = np.array([float(r["x"]) for r in table])
    f = np.array([float(r["pdf"]) for r in table])
    assert abs(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(x)) - 1.0) < 1e-6


def test_profile_v_minimised_at_theta_star(runner, tmp_path, baseline_eq):
    cfg = write(tmp_path, "f.json", {"model": BASELINE})
    res = runner.invoke(cli.main, ["profile", cfg, "--quantity", "V", "--points", "21"])
    assert res.exit_code == 0
    table = rows(res.output)
    thetas = np.array([float(r["theta"]) for r in table])
    values = np.array([float(r["V"]) for r in table])
    assert abs(thetas[np.argmin(values)] - baseline_eq.theta_star) <= thetas[1] - thetas[0]


def test_simulate_determinism_and_seed_override(runner, tmp_path, monkeypatch):
    cfg = write(tmp_path, "f.json", {"model": BASELINE, "sim": {"horizon": 20.0, "burn_in": 2.0, "n_paths": 8,
                                                             "dt": 0.005, "seed": 1}})
    first = runner.invoke(cli.main, ["simulate", cfg])
    second = runner.invoke(cli.main, ["simulate", cfg])
    assert first.exit_code == 0, first.output
    assert first.output == second.output
    monkeypatch.setenv("MFC_SEED", "2")
    env = runner.invoke(cli.main, ["simulate", cfg])
    assert json.loads(env.output)["sim_config"]["seed"] == 2
    flag = runner.invoke(cli.main, ["simulate", cfg, "--seed", "3"])
    assert json.loads(flag.output)["sim_config"]["seed"] == 3
    monkeypatch.setenv("MFC_SEED", "x")
    assert runner.invoke(cli.main, ["simulate", cfg]).exit_code == 2


def test_simulate_coarse_dt_flags_allowance(runner, tmp_path):
    cfg = write(tmp_path, "f.json", {"model": BASELINE})
    res = runner.invoke(cli.main, ["simulate", cfg, "--dt", "0.1"])
    assert res.exit_code == 0, res.output
    rep = json.loads(res.output)
    assert rep["dt_allowance_enlarged"] is True
    assert rep["checks"]["mean"]["dt_allowance"] > 0.01


def test_simulate_rejects_unstable_dt(runner, tmp_path):
    cfg = write(tmp_path, "f.json", {"model": BASELINE})
    assert runner.invoke(cli.main, ["simulate", cfg, "--dt", "0.6"]).exit_code == 2


def test_help_lists_commands(runner):
    res = runner.invoke(cli.main, ["--help"])
    assert res.exit_code == 0
    for cmd in ("solve", "sweep", "simulate", "profile"):
        assert cmd in res.output
