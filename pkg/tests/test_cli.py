import json
import math
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

import nehari.io as nio
import nehari.optimizer as opt
from nehari.cli import main
from nehari.dirichlet import DirichletProblem, discrete_lambda1, rayleigh_lambda1
from nehari.sps import RadialGrid, SpsNonlinearity, SpsProblem

DIRICHLET = ["--model", "dirichlet-1d", "--restarts", "2"]


@pytest.fixture
def temp_env(monkeypatch):
    old_cwd = os.getcwd()
    tmp_dir = tempfile.mkdtemp()
    os.chdir(tmp_dir)
    monkeypatch.delenv("NEHARI_SEED", raising=False)

    yield tmp_dir

    os.chdir(old_cwd)
    shutil.rmtree(tmp_dir)


def write_eigenfunction(n=127):
    p = DirichletProblem(n=n, mu=0.0)
    lam, vec = rayleigh_lambda1(p)
    nio.write_state_csv("state.csv", p.coordinates, vec, "x")
    return lam, vec, p


def test_print_config(temp_env, capsys):
    assert main(["print-config", "--seed", "5", "--set", "sweep.count=7"]) == 0
    out = capsys.readouterr().out
    assert "[solver]" in out
    assert "rng_seed = 5" in out
    assert "count = 7" in out


def test_eig_dirichlet(temp_env):
    args = ["eig", *DIRICHLET, "--set", "dirichlet.n=127", "--set", "dirichlet.mu=0.0"]
    assert main([*args, "--output", "first"]) == 0
    assert main([*args, "--output", "second"]) == 0

    data = json.loads(Path("first/lambda1.json").read_text())
    assert math.isclose(data["value"], math.pi**2, rel_tol=1e-2)
    assert math.isclose(data["value"], data["oracle"], rel_tol=1e-8)
    assert data["converged"]
    assert data["restarts"] == 2
    column, coords, _ = nio.read_state_csv("first/eigenfunction.csv")
    assert column == "x" and coords.size == 127

    for name in ("lambda1.json", "eigenfunction.csv"):
        assert Path("first", name).read_bytes() == Path("second", name).read_bytes()


def test_eig_rejects_supercritical_power(temp_env, capsys):
    assert main(["eig", "--set", "sps.sigma=4.0"]) == 1
    assert "18/7" in capsys.readouterr().err
    assert not Path("results").exists()


def test_verify_accepts_eigenfunction(temp_env, capsys):
    lam, _, _ = write_eigenfunction()
    code = main(["verify", "--model", "dirichlet-1d", "--set", "dirichlet.n=127", "--set", "dirichlet.mu=0.0",
                 "--state", "state.csv", "--lambda", repr(lam), "--c", "0"])
    report = json.loads(capsys.readouterr().out)
    assert code == 0
    assert report["accepted"]
    assert report["chain_holds"]
    assert report["multiplier"] is None


def test_verify_rejects_bad_states(temp_env, capsys):
    lam, vec, p = write_eigenfunction()
    base = ["verify", "--model", "dirichlet-1d", "--set", "dirichlet.n=127", "--set", "dirichlet.mu=0.0",
            "--state", "state.csv", "--lambda", repr(lam), "--c", "0"]

    nio.write_state_csv("state.csv", p.coordinates, np.zeros_like(vec), "x")
    assert main(base) == 2
    assert json.loads(capsys.readouterr().out)["flags"] == ["ZeroState"]

    tampered = vec.copy()
    tampered[40] *= 5.0
    nio.write_state_csv("state.csv", p.coordinates, tampered, "x")
    assert main(base) == 2
    assert "WeakResidual" in json.loads(capsys.readouterr().out)["flags"]

    Path("state.csv").write_text("x,u\n0.5,abc\n")
    assert main(base) == 1


def test_verify_checks_grid(temp_env, capsys):
    write_eigenfunction(n=63)
    code = main(["verify", "--model", "dirichlet-1d", "--set", "dirichlet.n=127", "--state", "state.csv",
                 "--lambda", "9.8", "--c", "-1"])
    assert code == 1
    assert "does not match" in capsys.readouterr().err
    # missing options are a configuration error
    assert main(["verify", "--model", "dirichlet-1d", "--state", "state.csv"]) == 1


def test_trace_dirichlet(temp_env):
    code = main(["trace", *DIRICHLET, "--set", "dirichlet.n=63",
                 "--c-min", "-10", "--c-max", "-0.1", "--count", "6"])
    assert code == 0
    rows = nio.read_curve_csv("results/curve.csv")
    assert len(rows) == 6
    lams = [row["lambda"] for row in rows]
    assert all(b < a for a, b in zip(lams, lams[1:]))

    record = json.loads(Path("results/curve.json").read_text())
    assert record["case"] == "I"
    assert record["failed_fraction"] == 0.0
    assert record["ordering_violations"] == []
    assert record["monotonicity_violations"] == []
    assert record["predicted_limits"]["upper_c"] == "-inf"
    assert record["config"]["problem"]["model"] == "dirichlet-1d"
    assert Path("results/curve.svg").exists()


def test_trace_rejects_bad_sweeps(temp_env, capsys):
    base = ["trace", *DIRICHLET, "--set", "dirichlet.n=63"]
    assert main([*base, "--c-min", "-1", "--c-max", "1"]) == 1
    assert "crosses c = 0" in capsys.readouterr().err
    # case II lives on positive energies
    assert main([*base, "--set", "dirichlet.mu=-1.0"]) == 1
    assert "admissible interval" in capsys.readouterr().err


def test_solve_certifies_nonexistence(temp_env):
    code = main(["solve", *DIRICHLET, "--set", "dirichlet.n=63", "--set", "dirichlet.mu=-1.0",
                 "--lambda-target", "4.0"])
    assert code == 3
    data = json.loads(Path("results/solution.json").read_text())
    assert data["nonexistence"] is True
    assert data["lambda1"] > 4.0


def test_solve_certifies_sps_nonexistence(temp_env):
    p = SpsProblem(RadialGrid(n=128), SpsNonlinearity(sign_sigma=-1))
    lam1 = opt.minimize_psi(p, opt.SolverConfig(restarts=2)).value
    code = main(["solve", "--restarts", "2", "--set", "sps.sign_sigma=-1", "--set", "sps.n=128",
                 "--lambda-target", repr(0.5 * lam1)])
    assert code == 3
    data = json.loads(Path("results/solution.json").read_text())
    assert data["nonexistence"] is True
    assert data["lambda_target"] < data["lambda1"]
    assert math.isclose(data["lambda1"], lam1, rel_tol=1e-4)


def test_solve_requires_target(temp_env, capsys):
    assert main(["solve", *DIRICHLET, "--set", "dirichlet.n=63"]) == 1
    assert "lambda_target" in capsys.readouterr().err


def test_solve_case_i(temp_env):
    target = discrete_lambda1(63) - 1.0
    code = main(["solve", *DIRICHLET, "--set", "dirichlet.n=63", "--c-min", "-10", "--c-max", "-0.01",
                 "--count", "12", "--lambda-target", repr(target), "--no-plot"])
    assert code == 0
    data = json.loads(Path("results/solution.json").read_text())
    assert data["accepted"]
    assert data["chain_holds"]
    assert -10.0 < data["c_star"] < -0.01
    assert math.isclose(data["lambda_curve"], target, rel_tol=1e-5)
    column, coords, values = nio.read_state_csv("results/solution.csv")
    assert column == "x" and values.size == 63
    assert not Path("results/curve.svg").exists()


def test_solve_reports_missing_crossing(temp_env):
    target = discrete_lambda1(63) + 1.0
    code = main(["solve", *DIRICHLET, "--set", "dirichlet.n=63", "--c-min", "-10", "--c-max", "-1",
                 "--count", "4", "--lambda-target", repr(target), "--no-plot"])
    assert code == 2
    data = json.loads(Path("results/solution.json").read_text())
    assert data["crossing"] is None


def test_numerical_failure_maps_to_exit_one(temp_env, monkeypatch, caplog):
    def broken(p, cfg):
        raise FloatingPointError("overflow in the Rayleigh quotient")

    monkeypatch.setattr(opt, "minimize_psi", broken)
    with caplog.at_level("ERROR", logger="nehari.cli"):
        assert main(["eig", *DIRICHLET, "--set", "dirichlet.n=63"]) == 1
    assert "FloatingPointError" in caplog.text
    assert "overflow in the Rayleigh quotient" in caplog.text
