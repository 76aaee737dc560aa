"""
config.py

Run configuration: embedded defaults, TOML files, NEHARI_SEED and
``--set section.key=value`` overrides, validated before any computation.
"""

import dataclasses
import math
import os
import pathlib
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field

import numpy as np

import nehari.core as core
from nehari.dirichlet import DEFAULT_TAU_CAP, DirichletProblem
from nehari.errors import CaseMismatch, ConfigError
from nehari.optimizer import SolverConfig, Tolerances
from nehari.sps import RadialGrid, SpsNonlinearity, SpsProblem

MODELS = ("sps", "dirichlet-1d")
SPACINGS = ("linear", "log")
SEED_ENV = "NEHARI_SEED"


@dataclass(frozen=True)
class ProblemSection:
    model: str = "sps"


@dataclass(frozen=True)
class SpsSection:
    sigma: float = 2.7
    tau: float = 4.0
    sign_sigma: int = 1
    sign_tau: int = 0
    n: int = 512
    r_min: float = 1e-3
    r_max: float = 60.0
    r_char: float = 1.0
    metric_shift: float = 1.0


@dataclass(frozen=True)
class DirichletSection:
    n: int = 511
    sigma: float = 1.5
    tau: float = 4.0
    mu: float = 1.0
    nu: float = 0.0
    tau_cap: float = DEFAULT_TAU_CAP


@dataclass(frozen=True)
class SweepSection:
    c_min: float = -100.0
    c_max: float = -0.01
    count: int = 24
    spacing: str = "log"
    boundary_eps: float = 1e-3


@dataclass(frozen=True)
class OutputSection:
    directory: str = "results"
    plot: bool = True


@dataclass(frozen=True)
class CommandSection:
    """Options only some subcommands read; unset values are omitted from TOML."""

    lambda_target: float | None = None
    state_file: str | None = None
    lambda_: float | None = None
    c: float | None = None


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSection = field(default_factory=ProblemSection)
    sps: SpsSection = field(default_factory=SpsSection)
    dirichlet: DirichletSection = field(default_factory=DirichletSection)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepSection = field(default_factory=SweepSection)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: OutputSection = field(default_factory=OutputSection)
    command: CommandSection = field(default_factory=CommandSection)


# TOML keys that differ from the dataclass attribute
_KEY_ALIASES = {("command", "lambda"): "lambda_"}


def _toml_key(section: str, attr: str) -> str:
    for (sec, key), name in _KEY_ALIASES.items():
        if sec == section and name == attr:
            return key
    return attr


def _attr_name(section: str, key: str) -> str:
    return _KEY_ALIASES.get((section, key), key)


def _coerce(section: str, fld: dataclasses.Field, value):
    kind = fld.type if isinstance(fld.type, str) else getattr(fld.type, "__name__", str(fld.type))
    where = f"{section}.{_toml_key(section, fld.name)}"
    if value is None:
        if "None" in kind:
            return None
        raise ConfigError(f"{where} may not be empty")
    if kind.startswith("bool"):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false, got {value!r}")
        return value
    if kind.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return value
    if kind.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where} must be a string, got {value!r}")
    return value


def _merge(cfg: RunConfig, data: dict) -> RunConfig:
    updates = {}
    sections = {f.name: f for f in dataclasses.fields(RunConfig)}
    for section, values in data.items():
        if section not in sections:
            raise ConfigError(f"Unknown config section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        current = getattr(cfg, section)
        fields = {f.name: f for f in dataclasses.fields(current)}
        changes = {}
        for key, value in values.items():
            attr = _attr_name(section, key)
            if attr not in fields:
                raise ConfigError(f"Unknown key '{key}' in [{section}]")
            changes[attr] = _coerce(section, fields[attr], value)
        try:
            updates[section] = dataclasses.replace(current, **changes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return dataclasses.replace(cfg, **updates)


def parse_override(text: str) -> dict:
    """'section.key=value' as a one-entry nested dict; the value is read as TOML."""
    if "=" not in text:
        raise ConfigError(f"Override '{text}' must look like section.key=value")
    dotted, raw = text.split("=", 1)
    parts = dotted.strip().split(".")
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"Override key '{dotted}' must be section.key")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return {parts[0]: {parts[1]: value}}


def load_config(path=None, overrides=(), env=None) -> RunConfig:
    """
    Effective configuration: defaults < TOML file < NEHARI_SEED < overrides.

    ``overrides`` are nested dicts (already-parsed flags) or 'section.key=value'
    strings, applied in order.
    """
    cfg = RunConfig()
    if path is not None:
        path = pathlib.Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            with open(path, "rb") as f:
                cfg = _merge(cfg, tomllib.load(f))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"Malformed TOML in {path}: {exc}") from exc

    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        try:
            seed = int(env[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV}={env[SEED_ENV]!r} is not an integer") from exc
        cfg = _merge(cfg, {"solver": {"rng_seed": seed}})

    for item in overrides:
        cfg = _merge(cfg, parse_override(item) if isinstance(item, str) else item)
    return cfg


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    escaped = str(value).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def dump_toml(cfg: RunConfig) -> str:
    lines = []
    for section in dataclasses.fields(RunConfig):
        values = getattr(cfg, section.name)
        lines.append(f"[{section.name}]")
        for fld in dataclasses.fields(values):
            value = getattr(values, fld.name)
            if value is None:
                continue
            lines.append(f"{_toml_key(section.name, fld.name)} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def active_case(cfg: RunConfig) -> "core.SignCase | None":
    if cfg.problem.model == "sps":
        signs = (cfg.sps.sign_sigma, cfg.sps.sign_tau)
    else:
        signs = (int(np.sign(cfg.dirichlet.mu)), int(np.sign(cfg.dirichlet.nu)))
    try:
        return core.SignCase.from_signs(*signs)
    except CaseMismatch as exc:
        raise ConfigError(str(exc)) from exc


def validate(cfg: RunConfig, need_case: bool = False, need_sweep: bool = False) -> RunConfig:
    """Raise ConfigError naming the first violated window; return cfg unchanged otherwise."""
    if cfg.problem.model not in MODELS:
        raise ConfigError(f"problem.model must be one of {', '.join(MODELS)}, got '{cfg.problem.model}'")
    # constructing the model runs every exponent, sign and grid check
    build_problem(cfg)
    case = active_case(cfg)
    if need_case and case is None:
        raise ConfigError("Both nonlinear terms are absent; this command needs one of the six sign cases")

    if need_sweep:
        sw = cfg.sweep
        if sw.spacing not in SPACINGS:
            raise ConfigError(f"sweep.spacing must be one of {', '.join(SPACINGS)}, got '{sw.spacing}'")
        if sw.count < 2:
            raise ConfigError(f"sweep.count must be >= 2, got {sw.count}")
        if not sw.c_min < sw.c_max:
            raise ConfigError(f"sweep.c_min={sw.c_min:g} must be below sweep.c_max={sw.c_max:g}")
        if sw.boundary_eps < 0:
            raise ConfigError(f"sweep.boundary_eps must be >= 0, got {sw.boundary_eps:g}")
        if sw.c_min <= 0.0 <= sw.c_max:
            raise ConfigError(f"Sweep [{sw.c_min:g}, {sw.c_max:g}] touches or crosses c = 0")
        interval = core.admissible_energy_interval(case)
        if not (interval.contains(sw.c_min) and interval.contains(sw.c_max)):
            raise ConfigError(
                f"Sweep [{sw.c_min:g}, {sw.c_max:g}] has no overlap with the admissible interval {interval} "
                f"of case {case.value}"
            )
    return cfg


def build_problem(cfg: RunConfig) -> core.ScaledProblem:
    if cfg.problem.model == "sps":
        s = cfg.sps
        grid = RadialGrid(s.n, s.r_min, s.r_max, s.r_char)
        nl = SpsNonlinearity(s.sigma, s.tau, s.sign_sigma, s.sign_tau)
        return SpsProblem(grid, nl, s.metric_shift)
    if cfg.problem.model == "dirichlet-1d":
        d = cfg.dirichlet
        return DirichletProblem(d.n, d.sigma, d.tau, d.mu, d.nu, d.tau_cap)
    raise ConfigError(f"problem.model must be one of {', '.join(MODELS)}, got '{cfg.problem.model}'")


def energy_grid(sweep: SweepSection) -> np.ndarray:
    """Sweep energies in increasing order; log spacing is taken in |c|."""
    if sweep.spacing == "linear":
        return np.linspace(sweep.c_min, sweep.c_max, sweep.count)
    sign = 1.0 if sweep.c_min > 0 else -1.0
    grid = sign * np.geomspace(abs(sweep.c_min), abs(sweep.c_max), sweep.count)
    return np.sort(grid)
