import numpy as np
import pytest

import nehari.config as conf
from nehari.core import SignCase
from nehari.dirichlet import DirichletProblem
from nehari.errors import ConfigError
from nehari.sps import SpsProblem


def test_defaults():
    cfg = conf.load_config(env={})
    assert cfg.problem.model == "sps"
    assert cfg.sps.sigma == 2.7
    assert cfg.solver.restarts == 8
    assert cfg.tolerances.weak == 1e-5
    assert cfg.command.lambda_target is None
    assert conf.active_case(cfg) is SignCase.I


def test_toml_file_overrides_defaults(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        '[problem]\nmodel = "dirichlet-1d"\n\n'
        "[dirichlet]\nn = 127\nmu = -1.0\n\n"
        "[solver]\nrestarts = 3\nrng_seed = 1\n\n"
        "[command]\nlambda = 9.5\n"
    )
    cfg = conf.load_config(path, env={})
    assert cfg.problem.model == "dirichlet-1d"
    assert cfg.dirichlet.n == 127
    assert cfg.solver.restarts == 3
    assert cfg.command.lambda_ == 9.5
    assert conf.active_case(cfg) is SignCase.II


def test_precedence_of_seed_sources(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[solver]\nrng_seed = 1\n")
    assert conf.load_config(path, env={}).solver.rng_seed == 1
    assert conf.load_config(path, env={"NEHARI_SEED": "7"}).solver.rng_seed == 7
    cfg = conf.load_config(path, ["solver.rng_seed=9"], env={"NEHARI_SEED": "7"})
    assert cfg.solver.rng_seed == 9
    with pytest.raises(ConfigError, match="NEHARI_SEED"):
        conf.load_config(env={"NEHARI_SEED": "seven"})


def test_rejects_unknown_and_mistyped_entries(tmp_path):
    with pytest.raises(ConfigError, match="Unknown config section"):
        conf.load_config(overrides=["grid.n=10"], env={})
    with pytest.raises(ConfigError, match="Unknown key 'sigmaa'"):
        conf.load_config(overrides=["sps.sigmaa=2.5"], env={})
    with pytest.raises(ConfigError, match="must be an integer"):
        conf.load_config(overrides=["sweep.count=many"], env={})
    with pytest.raises(ConfigError, match="true or false"):
        conf.load_config(overrides=["output.plot=1"], env={})
    with pytest.raises(ConfigError, match="backtrack"):
        conf.load_config(overrides=["solver.backtrack=2.0"], env={})
    with pytest.raises(ConfigError, match="not found"):
        conf.load_config(tmp_path / "missing.toml", env={})
    broken = tmp_path / "broken.toml"
    broken.write_text("[sps\nsigma = 2\n")
    with pytest.raises(ConfigError, match="Malformed TOML"):
        conf.load_config(broken, env={})


def test_parse_override():
    assert conf.parse_override("sweep.count=5") == {"sweep": {"count": 5}}
    assert conf.parse_override("sweep.spacing=linear") == {"sweep": {"spacing": "linear"}}
    assert conf.parse_override("output.plot=false") == {"output": {"plot": False}}
    assert conf.parse_override("sps.sigma = 2.8") == {"sps": {"sigma": 2.8}}
    with pytest.raises(ConfigError, match="section.key=value"):
        conf.parse_override("sweep.count")
    with pytest.raises(ConfigError, match="section.key"):
        conf.parse_override("count=5")


def test_integral_float_is_accepted_as_int():
    cfg = conf.load_config(overrides=[{"sweep": {"count": 12.0}}], env={})
    assert cfg.sweep.count == 12
    assert isinstance(cfg.sweep.count, int)


def test_dump_toml_round_trip(tmp_path):
    cfg = conf.load_config(overrides=["problem.model=\"dirichlet-1d\"", "command.lambda=9.25",
                                      "sweep.c_min=-50.0"], env={})
    text = conf.dump_toml(cfg)
    assert "lambda = 9.25" in text
    assert "state_file" not in text
    path = tmp_path / "dump.toml"
    path.write_text(text)
    assert conf.load_config(path, env={}) == cfg


def test_validate_windows():
    with pytest.raises(ConfigError, match="problem.model"):
        conf.validate(conf.load_config(overrides=["problem.model=heat"], env={}))
    with pytest.raises(ConfigError, match="18/7"):
        conf.validate(conf.load_config(overrides=["sps.sigma=4.0"], env={}))
    plain = conf.load_config(overrides=["sps.sign_sigma=0"], env={})
    assert conf.validate(plain) is plain
    with pytest.raises(ConfigError, match="Both nonlinear terms"):
        conf.validate(plain, need_case=True)


def test_validate_sweep():
    def sweep_cfg(*items):
        return conf.load_config(overrides=["problem.model=dirichlet-1d", "dirichlet.n=63", *items], env={})

    conf.validate(sweep_cfg(), need_case=True, need_sweep=True)
    with pytest.raises(ConfigError, match="crosses c = 0"):
        conf.validate(sweep_cfg("sweep.c_min=-1.0", "sweep.c_max=1.0"), need_case=True, need_sweep=True)
    with pytest.raises(ConfigError, match="below"):
        conf.validate(sweep_cfg("sweep.c_min=-0.001"), need_case=True, need_sweep=True)
    with pytest.raises(ConfigError, match="count"):
        conf.validate(sweep_cfg("sweep.count=1"), need_case=True, need_sweep=True)
    with pytest.raises(ConfigError, match="spacing"):
        conf.validate(sweep_cfg("sweep.spacing=cubic"), need_case=True, need_sweep=True)
    with pytest.raises(ConfigError, match="boundary_eps"):
        conf.validate(sweep_cfg("sweep.boundary_eps=-1.0"), need_case=True, need_sweep=True)
    with pytest.raises(ConfigError, match="admissible interval"):
        conf.validate(sweep_cfg("dirichlet.mu=-1.0"), need_case=True, need_sweep=True)


def test_energy_grid():
    log = conf.energy_grid(conf.SweepSection(c_min=-100.0, c_max=-0.01, count=5))
    np.testing.assert_allclose(log, [-100.0, -10.0, -1.0, -0.1, -0.01], rtol=1e-12)
    positive = conf.energy_grid(conf.SweepSection(c_min=0.01, c_max=100.0, count=5))
    np.testing.assert_allclose(positive, [0.01, 0.1, 1.0, 10.0, 100.0], rtol=1e-12)
    linear = conf.energy_grid(conf.SweepSection(c_min=-2.0, c_max=-1.0, count=3, spacing="linear"))
    np.testing.assert_allclose(linear, [-2.0, -1.5, -1.0])


def test_build_problem():
    sps = conf.build_problem(conf.load_config(overrides=["sps.n=128"], env={}))
    assert isinstance(sps, SpsProblem)
    assert sps.size == 128
    one_d = conf.build_problem(conf.load_config(overrides=["problem.model=dirichlet-1d", "dirichlet.n=63"], env={}))
    assert isinstance(one_d, DirichletProblem)
    assert one_d.case is SignCase.I
