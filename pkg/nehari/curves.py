"""
curves.py

Energy curves c -> lambda_{c,1}.

trace_curve sweeps an energy grid with warm-started minimizations,
intersect_with_lambda finds the energy whose curve value is a prescribed
lambda, fit_asymptote estimates the limit and rate at the regular end of the
curve and nonexistence_scan decides (and corroborates) whether N_c is empty.
"""

import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

import nehari.core as core
import nehari.optimizer as opt
from nehari.core import SignCase
from nehari.errors import InsufficientTail, NehariError, NoConvergence
from nehari.sampling import random_bump_state, restart_rng

logger = logging.getLogger(__name__)

MONO_RTOL = 1e-4
LAMBDA_RTOL = 1e-6
MIN_TAIL = 6
# energies closer than this to c = 0 are not traced; the fiber time degenerates there
BOUNDARY_EPS = 1e-3


@dataclass
class CurvePoint:
    c: float
    lambda_: float | None
    minimizer_ref: int | None
    grad_norm: float | None
    fiber_t: float | None
    status: str = "ok"
    dlambda_dc: float | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "lambda": self.lambda_,
            "grad_norm": self.grad_norm,
            "fiber_t": self.fiber_t,
            "status": self.status,
            "dlambda_dc": self.dlambda_dc,
            "message": self.message,
        }


@dataclass
class Curve:
    case: SignCase
    points: list[CurvePoint]
    fingerprint: str
    problem: dict
    states: dict = field(default_factory=dict)
    nehari_states: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    lambda1: float | None = None
    skipped: list = field(default_factory=list)

    @property
    def ok_points(self) -> list[CurvePoint]:
        return [pt for pt in self.points if pt.status == "ok"]

    @property
    def failed_fraction(self) -> float:
        if not self.points:
            return 0.0
        return sum(1 for pt in self.points if pt.status != "ok") / len(self.points)

    def to_dict(self) -> dict:
        return {
            "case": self.case.value,
            "fingerprint": self.fingerprint,
            "problem": self.problem,
            "lambda1": self.lambda1,
            "points": [pt.to_dict() for pt in self.points],
            "monotonicity_violations": [list(pair) for pair in self.violations],
            "skipped_near_zero": list(self.skipped),
        }


@dataclass
class IntersectResult:
    c_star: float
    point: CurvePoint
    state: np.ndarray
    report: opt.MinimizeReport | None


@dataclass
class NonexistenceScan:
    empty: bool
    sign_unanimous: bool
    samples: int
    residual_sign: int
    witness_residual: float | None = None


def problem_fingerprint(p: core.ScaledProblem) -> str:
    text = json.dumps(p.describe(), sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _sweep_order(case: SignCase, c_values: list[float]) -> list[float]:
    """Start at the regular end of the curve (limit lambda_1) and move toward the singular one."""
    by_abs = sorted(c_values, key=abs)
    if case in (SignCase.III, SignCase.IV):
        return by_abs
    return by_abs[::-1]


def monotonicity_violations(points: list[CurvePoint], rtol: float = MONO_RTOL) -> list[tuple[float, float]]:
    ok = sorted((pt for pt in points if pt.status == "ok"), key=lambda pt: pt.c)
    bad = []
    for a, b in zip(ok, ok[1:]):
        if b.lambda_ > a.lambda_ + rtol * (1.0 + abs(a.lambda_)):
            bad.append((a.c, b.c))
    return bad


def trace_curve(p: core.ScaledProblem, c_grid, cfg: opt.SolverConfig = opt.SolverConfig(),
                mono_rtol: float = MONO_RTOL, boundary_eps: float = BOUNDARY_EPS) -> Curve:
    """
    Minimize Lambda~_c along ``c_grid`` with continuation.

    Failed points are recorded with status "failed" and the sweep goes on
    from the last good minimizer. Energies with |c| < boundary_eps are left
    out (listed in ``Curve.skipped``): near c = 0 the fiber time tends to 0
    or infinity and the scaled state leaves the resolved part of the grid.
    """
    c_values = [float(c) for c in c_grid]
    if not c_values:
        raise ValueError("Energy grid is empty")
    steps = np.diff(c_values)
    if len(steps) and not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("Energy grid must be strictly monotone")
    if boundary_eps < 0:
        raise ValueError(f"boundary_eps must be >= 0, got {boundary_eps}")
    for c in c_values:
        core.require_admissible(p.case, c)

    skipped = [c for c in c_values if abs(c) < boundary_eps]
    if skipped:
        logger.warning("Skipping %d energies within boundary_eps=%g of c = 0: %s",
                       len(skipped), boundary_eps, ", ".join(f"{c:g}" for c in skipped))
        c_values = [c for c in c_values if abs(c) >= boundary_eps]
        if not c_values:
            raise ValueError(f"Every energy of the grid lies within boundary_eps={boundary_eps:g} of c = 0")

    curve = Curve(case=p.case, points=[], fingerprint=problem_fingerprint(p), problem=p.describe(),
                  skipped=skipped)
    warm = None
    by_c = {}
    for c in _sweep_order(p.case, c_values):
        try:
            rep = opt.minimize_lambda_tilde(p, c, cfg, warm_start=warm)
        except NehariError as exc:
            partial = getattr(exc, "report", None)
            logger.warning("Curve point c=%g failed: %s", c, exc)
            by_c[c] = CurvePoint(c, None, None, partial.grad_norm if partial else None, None, "failed",
                                 message=str(exc))
            continue
        ref = len(curve.states)
        curve.states[ref] = rep.minimizer
        curve.nehari_states[ref] = rep.nehari_state
        slope = core.dlambda_tilde_dc(p, rep.minimizer, c)
        by_c[c] = CurvePoint(c, rep.value, ref, rep.grad_norm, rep.fiber_t, "ok", slope)
        logger.info("c=%-12g lambda=%.10g fiber_t=%.6g", c, rep.value, rep.fiber_t)
        warm = rep.minimizer

    curve.points = [by_c[c] for c in sorted(by_c)]
    curve.violations = monotonicity_violations(curve.points, mono_rtol)
    for a, b in curve.violations:
        logger.warning("Curve increases between c=%g and c=%g", a, b)
    return curve


def slope_consistency(curve: Curve) -> list[float]:
    """
    Ratios of the secant slope between neighbours to the mean of
    dLambda~/dc at their minimizers. Values near 1 on fine grids.
    """
    ok = curve.ok_points
    ratios = []
    for a, b in zip(ok, ok[1:]):
        secant = (b.lambda_ - a.lambda_) / (b.c - a.c)
        ratios.append(secant / (0.5 * (a.dlambda_dc + b.dlambda_dc)))
    return ratios


def ordering_violations(curve: Curve, lambda1: float, atol: float = 0.0) -> list[float]:
    """Energies where the curve sits on the wrong side of lambda_1 (below in II/IV, above in I/III)."""
    bad = []
    for pt in curve.ok_points:
        if curve.case in (SignCase.I, SignCase.III) and pt.lambda_ > lambda1 + atol:
            bad.append(pt.c)
        elif curve.case in (SignCase.II, SignCase.IV) and pt.lambda_ < lambda1 - atol:
            bad.append(pt.c)
    return bad


def intersect_with_lambda(p: core.ScaledProblem, curve: Curve, lambda_target: float,
                          cfg: opt.SolverConfig = opt.SolverConfig(), tol: float | None = None,
                          max_steps: int = 200) -> "IntersectResult | None":
    """
    Energy c* with lambda_{c*,1} = lambda_target, or None when the traced
    curve never reaches the target.

    The bracket between neighbouring curve points is shrunk with the Illinois
    variant of regula falsi, re-solving lambda_{c,1} at every step.
    """
    ok = curve.ok_points
    if len(ok) < 2:
        raise ValueError(f"Need at least 2 successful curve points, got {len(ok)}")
    if tol is None:
        tol = LAMBDA_RTOL * (1.0 + abs(lambda_target))

    for pt in ok:
        if abs(pt.lambda_ - lambda_target) <= tol:
            return IntersectResult(pt.c, pt, curve.nehari_states[pt.minimizer_ref], None)

    bracket = None
    for a, b in zip(ok, ok[1:]):
        if (a.lambda_ - lambda_target) * (b.lambda_ - lambda_target) < 0:
            bracket = (a, b)
            break
    if bracket is None:
        logger.info("lambda_target=%g is not crossed on [%g, %g]", lambda_target, ok[0].c, ok[-1].c)
        return None

    a, b = bracket
    c_a, f_a = a.c, a.lambda_ - lambda_target
    c_b, f_b = b.c, b.lambda_ - lambda_target
    warm = curve.states[a.minimizer_ref]
    side = 0
    for step in range(max_steps):
        c_mid = c_b - f_b * (c_b - c_a) / (f_b - f_a)
        if not (min(c_a, c_b) < c_mid < max(c_a, c_b)):
            c_mid = 0.5 * (c_a + c_b)
        rep = opt.minimize_lambda_tilde(p, c_mid, cfg, warm_start=warm)
        f_mid = rep.value - lambda_target
        logger.info("step %d: c=%.15g lambda=%.12g", step, c_mid, rep.value)
        if abs(f_mid) <= tol:
            point = CurvePoint(c_mid, rep.value, None, rep.grad_norm, rep.fiber_t, "ok",
                               core.dlambda_tilde_dc(p, rep.minimizer, c_mid))
            return IntersectResult(c_mid, point, rep.nehari_state, rep)
        warm = rep.minimizer
        if f_mid * f_b < 0:
            c_a, f_a = c_b, f_b
            side = 0
        elif side == 1:
            f_a *= 0.5
        else:
            side = 1
        c_b, f_b = c_mid, f_mid
        if abs(c_b - c_a) <= 4 * np.finfo(float).eps * max(abs(c_a), abs(c_b)):
            break
    raise NoConvergence(f"Could not locate lambda_target={lambda_target:g} within tol={tol:.3e}")


def predicted_rate_exponent(case: SignCase, exponents: core.ScalingExponents) -> float:
    """
    Exponent e in lambda ~ L + A |c|^e at the regular end of the curve:
    -(s-q)/q as |c| -> inf in cases I, II; (r-s)/r as c -> 0 in cases III, IV.
    Mixed cases reuse the F-driven exponent as a starting guess.
    """
    e = exponents
    if case in (SignCase.III, SignCase.IV):
        return (e.r - e.s) / e.r
    return -(e.s - e.q) / e.q


def fit_asymptote(curve: Curve, exponents: core.ScalingExponents, tail: int | None = None) -> tuple[float, float]:
    """
    Least-squares fit of lambda = L + A |c|^e over the tail of the curve.

    Returns (L, |e|). The tail is the ``tail`` successful points closest to
    the regular end (all of them by default).
    """
    ok = curve.ok_points
    if curve.case in (SignCase.III, SignCase.IV):
        ok = sorted(ok, key=lambda pt: abs(pt.c))
    else:
        ok = sorted(ok, key=lambda pt: -abs(pt.c))
    if tail is not None:
        ok = ok[:tail]
    if len(ok) < MIN_TAIL:
        raise InsufficientTail(f"Asymptotic fit needs at least {MIN_TAIL} points, got {len(ok)}")

    x = np.array([abs(pt.c) for pt in ok])
    y = np.array([pt.lambda_ for pt in ok])
    if np.ptp(y) <= 1e-12 * (1.0 + np.max(np.abs(y))):
        raise InsufficientTail("Curve is constant on the tail; the rate is undetermined")

    e0 = predicted_rate_exponent(curve.case, exponents)
    design = np.column_stack([np.ones_like(x), x**e0])
    (l0, a0), *_ = np.linalg.lstsq(design, y, rcond=None)

    def model(xx, limit, amp, expo):
        return limit + amp * xx**expo

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", optimize.OptimizeWarning)
            (limit, _, expo), _ = optimize.curve_fit(model, x, y, p0=(l0, a0, e0), maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise InsufficientTail(f"Asymptotic fit failed: {exc}") from exc
    if not (math.isfinite(limit) and math.isfinite(expo)):
        raise InsufficientTail("Asymptotic fit returned non-finite parameters")
    return float(limit), float(abs(expo))


def nonexistence_scan(p: core.ScaledProblem, c: float, samples: int = 100, seed: int = 0) -> NonexistenceScan:
    """
    N_c is empty exactly when c lies outside the admissible interval of the
    case. Sampled Nehari residuals then share one sign; inside the interval
    the fiber map of the first sample gives a witness in N_c.
    """
    if p.case is None:
        empty = c != 0.0
    else:
        empty = not core.admissible_energy_interval(p.case).contains(c)

    states = [p.retract(random_bump_state(p, restart_rng(seed, k))) for k in range(samples)]
    signs = {int(np.sign(core.nehari_residual(p, u, c))) for u in states}
    unanimous = len(signs) == 1 and 0 not in signs
    residual_sign = signs.pop() if unanimous else 0

    witness = None
    if not empty and p.case is not None:
        u = states[0]
        fiber = core.solve_fiber_time(p, u, c)
        v = p.scale(u, fiber.t)
        e = p.exponents
        vals = p.values(v)
        scale = e.s * vals.i_s + (e.s - e.q) * abs(vals.f) + (e.r - e.s) * abs(vals.g) + e.s * abs(c)
        witness = abs(core.nehari_residual(p, v, c)) / scale
    return NonexistenceScan(empty, unanimous, samples, residual_sign, witness)
