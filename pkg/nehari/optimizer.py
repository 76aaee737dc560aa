"""
optimizer.py

Riemannian projected-gradient descent on the sphere M_s = {I_s = 1}.

minimize_psi computes lambda_1 = min Psi~ and minimize_lambda_tilde computes
lambda_{c,1} = min Lambda~_c. Both take the Riesz gradient in the problem
metric, remove its component along the constraint normal, step with Armijo
backtracking and retract. For Lambda~_c the minimizer u* is carried onto N_c
by the fiber map and, when ``polish`` is on, refined as a critical point of
lambda_c on the discrete Nehari set, where the constraint is natural.

verify_solution checks a candidate (lambda, v) against the weak form, the
Nehari constraint, the Pohozaev identity and the prescribed energy.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

import nehari.core as core
from nehari.errors import CaseMismatch, ConfigError, NoConvergence, ZeroState
from nehari.sampling import random_bump_state, restart_rng

logger = logging.getLogger(__name__)

MIN_STEP = 1e-18
STEP_GROWTH = 2.0


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 2000
    grad_tol: float = 1e-7
    step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    restarts: int = 8
    rng_seed: int = 0
    workers: int = 1
    norm_ceiling: float = 1e6
    polish: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.grad_tol <= 0:
            raise ConfigError(f"grad_tol must be positive, got {self.grad_tol}")
        if self.step <= 0:
            raise ConfigError(f"step must be positive, got {self.step}")
        if not (0.0 < self.backtrack < 1.0):
            raise ConfigError(f"backtrack factor must lie in (0, 1), got {self.backtrack}")
        if not (0.0 < self.armijo < 1.0):
            raise ConfigError(f"armijo constant must lie in (0, 1), got {self.armijo}")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class Tolerances:
    """Acceptance thresholds for verify_solution; residuals are scale-relative."""

    weak: float = 1e-5
    nehari: float = 1e-5
    pohozaev: float = 1e-5
    energy: float = 1e-5
    h: float = 1e-8


@dataclass
class MinimizeReport:
    minimizer: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    restarts_used: int
    restart_values: tuple = ()
    history: tuple = ()
    nehari_state: np.ndarray | None = None
    fiber_t: float | None = None
    sphere_value: float | None = None
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "restarts": self.restarts_used,
            "restart_values": list(self.restart_values),
            "fiber_t": self.fiber_t,
            "sphere_value": self.sphere_value,
            "warnings": list(self.warnings),
        }


@dataclass
class SolutionReport:
    state: np.ndarray
    lambda_: float
    c: float
    weak_residual: float | None
    nehari_residual: float | None
    pohozaev_residual: float | None
    energy_residual: float | None
    h_pairing: float | None
    multiplier: float | None = None
    flags: list = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return not self.flags

    @property
    def chain_holds(self) -> bool:
        """Energy and weak residuals within tolerance must imply the Nehari one."""
        if "ZeroState" in self.flags:
            return True
        premise = "EnergyResidual" not in self.flags and "WeakResidual" not in self.flags
        return (not premise) or "NehariResidual" not in self.flags

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambda_,
            "c": self.c,
            "accepted": self.accepted,
            "flags": list(self.flags),
            "residuals": {
                "weak": self.weak_residual,
                "nehari": self.nehari_residual,
                "pohozaev": self.pohozaev_residual,
                "energy": self.energy_residual,
            },
            "h_pairing": self.h_pairing,
            "multiplier": self.multiplier,
        }


class _Sphere:
    def __init__(self, p: core.ScaledProblem):
        self.p = p

    def retract(self, u):
        return self.p.retract(u)

    def normal(self, u):
        return self.p.grad_I(u)


class _NehariSet:
    def __init__(self, p: core.ScaledProblem, c: float):
        self.p, self.c = p, c

    def retract(self, u):
        return self.p.amplitude_to_nehari(u, self.c)

    def normal(self, u):
        return core.nehari_constraint_gradient(self.p, u)


@dataclass
class _Run:
    state: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    history: list
    warnings: list


def _descend(p: core.ScaledProblem, objective, manifold, x0, cfg: SolverConfig) -> _Run:
    x = manifold.retract(x0)
    value, egrad = objective(x)
    history = [value]
    warnings = []
    step = cfg.step
    grad_norm = math.inf
    converged = False
    it = 0

    while True:
        g = p.riesz(egrad)
        normal = manifold.normal(x)
        p_normal = p.riesz(normal)
        denom = float(normal @ p_normal)
        g_tan = g - (float(normal @ g) / denom) * p_normal if denom > 0 else g
        g_sq = max(p.inner(g_tan, g_tan), 0.0)
        # relative to the iterate's size so the test does not depend on its amplitude
        grad_norm = math.sqrt(g_sq) * p.norm(x) / (1.0 + abs(value))
        logger.debug("iter %d value %.15g grad_norm %.3e step %.3e", it, value, grad_norm, step)
        if grad_norm <= cfg.grad_tol:
            converged = True
            break
        if it >= cfg.max_iters:
            break

        accepted = False
        while step >= MIN_STEP:
            try:
                trial = manifold.retract(x - step * g_tan)
                t_value, t_grad = objective(trial)
            except (ZeroState, CaseMismatch, NoConvergence):
                t_value = math.inf
            if t_value <= value - cfg.armijo * step * g_sq:
                accepted = True
                break
            step *= cfg.backtrack
        if not accepted:
            logger.debug("Line search stalled at iteration %d (grad_norm %.3e)", it, grad_norm)
            break

        x, value, egrad = trial, t_value, t_grad
        history.append(value)
        it += 1
        step *= STEP_GROWTH

        if not warnings and p.norm(x) > cfg.norm_ceiling:
            msg = f"iterate norm {p.norm(x):.3e} exceeds ceiling {cfg.norm_ceiling:.3e} at bounded value {value:.6g}"
            logger.warning("Coercivity guard: %s", msg)
            warnings.append(msg)

    return _Run(x, value, grad_norm, it, converged, history, warnings)


def _starting_states(p: core.ScaledProblem, cfg: SolverConfig, initial) -> list:
    if initial is not None:
        return [p.check_state(initial)]
    return [random_bump_state(p, restart_rng(cfg.rng_seed, k)) for k in range(cfg.restarts)]


def _run_all(p, objective, manifold, starts, cfg: SolverConfig) -> list[_Run]:
    def one(x0):
        return _descend(p, objective, manifold, x0, cfg)

    if cfg.workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(one, starts))
    else:
        runs = [one(x0) for x0 in starts]
    for k, run in enumerate(runs):
        logger.info("restart %d: value %.12g grad_norm %.3e iterations %d converged %s",
                    k, run.value, run.grad_norm, run.iterations, run.converged)
    return runs


def _pick(runs: list[_Run]) -> _Run:
    pool = [(r.value, k) for k, r in enumerate(runs) if r.converged] or [(r.value, k) for k, r in enumerate(runs)]
    return runs[min(pool)[1]]


def _report(best: _Run, runs: list[_Run]) -> MinimizeReport:
    warnings = tuple(w for r in runs for w in r.warnings)
    return MinimizeReport(
        minimizer=best.state,
        value=best.value,
        grad_norm=best.grad_norm,
        iterations=best.iterations,
        converged=best.converged,
        restarts_used=len(runs),
        restart_values=tuple(r.value for r in runs),
        history=tuple(best.history),
        warnings=warnings,
    )


def minimize_psi(p: core.ScaledProblem, cfg: SolverConfig = SolverConfig(), initial=None) -> MinimizeReport:
    """lambda_1 = min over M_s of Psi~ = 1/J_s, best of the restarts (or one run from ``initial``)."""
    runs = _run_all(p, lambda u: core.reduced_psi(p, u), _Sphere(p), _starting_states(p, cfg, initial), cfg)
    best = _pick(runs)
    report = _report(best, runs)
    report.sphere_value = best.value
    if not best.converged:
        raise NoConvergence(
            f"No restart reached grad_tol={cfg.grad_tol:g} (best grad_norm {best.grad_norm:.3e})", report
        )
    return report


def _lambda_c_objective(p, c):
    def objective(v):
        return core.lambda_c_value(p, v, c), core.lambda_c_gradient(p, v, c)
    return objective


def minimize_lambda_tilde(p: core.ScaledProblem, c: float, cfg: SolverConfig = SolverConfig(),
                          warm_start=None) -> MinimizeReport:
    """
    lambda_{c,1} = min over M_s of Lambda~_c.

    Returns the sphere minimizer u* with its fiber time and the state
    v* on N_c. ``value`` is lambda_c(v*), which equals Lambda~_c(u*) up to
    the polish.
    """
    core.require_admissible(p.case, c)

    def objective(u):
        value, grad, _ = core.reduced_lambda_tilde(p, u, c)
        return value, grad

    runs = _run_all(p, objective, _Sphere(p), _starting_states(p, cfg, warm_start), cfg)
    best = _pick(runs)
    report = _report(best, runs)
    report.sphere_value = best.value
    if not best.converged:
        raise NoConvergence(
            f"Lambda~ descent at c={c:g} missed grad_tol={cfg.grad_tol:g} (grad_norm {best.grad_norm:.3e})", report
        )

    fiber = core.solve_fiber_time(p, best.state, c)
    report.fiber_t = fiber.t
    report.nehari_state = p.scale(best.state, fiber.t)

    if cfg.polish:
        polish = _descend(p, _lambda_c_objective(p, c), _NehariSet(p, c), report.nehari_state, cfg)
        logger.info("polish at c=%g: %.12g -> %.12g in %d iterations", c, best.value, polish.value, polish.iterations)
        report.nehari_state = polish.state
        report.value = polish.value
        report.grad_norm = polish.grad_norm
        report.iterations += polish.iterations
        report.converged = polish.converged
        report.warnings += tuple(polish.warnings)
        if not polish.converged:
            raise NoConvergence(
                f"Nehari polish at c={c:g} missed grad_tol={cfg.grad_tol:g} (grad_norm {polish.grad_norm:.3e})",
                report,
            )
    return report


def verify_solution(p: core.ScaledProblem, v, lam: float, c: float, tol: Tolerances = Tolerances()) -> SolutionReport:
    """
    Residuals of a candidate solution (lam, v) with prescribed energy c.

    weak: max over hat functions and v itself of |Phi_lam'(v) w| / ||w||,
          relative to the same test directions applied to the sum of the term magnitudes.
    nehari, pohozaev, energy: the identities on functional values, each divided
          by the sum of the absolute values of its terms.
    """
    v = p.check_state(v)
    vals = p.values(v)
    if vals.i_s <= core.TOL_ZERO or vals.j_s <= core.TOL_ZERO:
        return SolutionReport(v, lam, c, None, None, None, None, None, None, ["ZeroState"])

    e = p.exponents
    gi, gj, gf, gg = p.grad_I(v), p.grad_J(v), p.grad_F(v), p.grad_G(v)
    residual = gi - lam * gj - gf - gg
    magnitude = np.abs(gi) + abs(lam) * np.abs(gj) + np.abs(gf) + np.abs(gg)
    hat_norms = np.sqrt(p.metric_diagonal())
    v_norm = p.norm(v)
    dual_res = max(float(np.max(np.abs(residual) / hat_norms)), abs(float(residual @ v)) / v_norm)
    dual_scale = max(
        float(np.max(magnitude / hat_norms)),
        (abs(float(gi @ v)) + abs(lam * float(gj @ v)) + abs(float(gf @ v)) + abs(float(gg @ v))) / v_norm,
    )
    weak = dual_res / dual_scale

    nehari_scale = e.s * vals.i_s + (e.s - e.q) * abs(vals.f) + (e.r - e.s) * abs(vals.g) + e.s * abs(c)
    nehari = abs(core.nehari_residual(p, v, c)) / nehari_scale

    poho_scale = e.s * vals.i_s + e.s * abs(lam) * vals.j_s + e.q * abs(vals.f) + e.r * abs(vals.g)
    pohozaev = abs(core.pohozaev_residual(p, v, 1.0, lam, 1.0, 1.0)) / poho_scale

    energy_scale = vals.i_s + abs(lam) * vals.j_s + abs(vals.f) + abs(vals.g) + abs(c)
    energy = abs(core.phi_lambda(p, v, lam) - c) / energy_scale

    flags = []
    if weak > tol.weak:
        flags.append("WeakResidual")
    if nehari > tol.nehari:
        flags.append("NehariResidual")
    if pohozaev > tol.pohozaev:
        flags.append("PohozaevResidual")
    if energy > tol.energy:
        flags.append("EnergyResidual")

    h_value = core.h_pairing(p, v)
    multiplier = None
    if p.case is not None:
        if abs(h_value) <= tol.h * v_norm:
            flags.append("DegenerateH")
        multiplier = core.nehari_multiplier(p, v, c)

    return SolutionReport(v, lam, c, weak, nehari, pohozaev, energy, h_value, multiplier, flags)
