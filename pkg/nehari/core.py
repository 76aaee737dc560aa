"""
core.py

The scaled Nehari manifold machinery shared by every instantiation.

A scaled problem carries four potentials I_s, J_s (degree s), F (degree q)
and G (degree r) under a scaling action u -> u_t with r > s > q > 0. This
module implements, on top of the ScaledProblem contract:

- the six admissible sign cases and their energy intervals,
- the sphere projection M_s = {I_s = 1},
- the fiber equation (s-q) t^q F - (r-s) t^r G + c s = 0 and its root t_c(u),
- lambda_c, Lambda_c on N_c, the reduced Lambda~_c and its closed forms,
- Pohozaev / Nehari residuals and the Riesz gradient of lambda_c.

Functions suffixed ``_value`` work on plain numbers and are what the
state-level operations reduce to.
"""

import enum
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize

from nehari.errors import CaseMismatch, GridMismatch, NoConvergence, NotOnNehari, ZeroState

logger = logging.getLogger(__name__)

TOL_ZERO = 1e-24
SPHERE_TOL = 1e-10
FIBER_RTOL = 1e-12
NEHARI_RTOL = 1e-8

_BRACKET_LO = 2.0**-20
_BRACKET_CAP = 2.0**40
_BRACKET_FLOOR = 2.0**-80


@dataclass(frozen=True)
class ScalingExponents:
    """Degrees (s, q, r) of (I_s, J_s), F and G under the scaling action."""

    s: float
    q: float
    r: float

    def __post_init__(self):
        if not (self.r > self.s > self.q > 0):
            raise ValueError(
                f"Scaling exponents must satisfy r > s > q > 0, got s={self.s}, q={self.q}, r={self.r}"
            )


class EnergyInterval(NamedTuple):
    lower: float
    upper: float

    def contains(self, c: float) -> bool:
        """Open-interval membership."""
        return self.lower < c < self.upper

    def __str__(self):
        return f"({self.lower:g}, {self.upper:g})"


class SignCase(enum.Enum):
    """The six sign patterns of (F, G) for which the fiber root is unique."""

    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"

    @property
    def signs(self) -> tuple[int, int]:
        return _CASE_SIGNS[self]

    @property
    def f_sign(self) -> int:
        return _CASE_SIGNS[self][0]

    @property
    def g_sign(self) -> int:
        return _CASE_SIGNS[self][1]

    @property
    def interval(self) -> EnergyInterval:
        return admissible_energy_interval(self)

    @classmethod
    def from_signs(cls, f_sign: int, g_sign: int) -> "SignCase | None":
        """
        Map the signs of (F, G) to a case.

        Returns None when both terms are absent (the plain eigenvalue problem).
        Raises CaseMismatch for the two same-sign mixed patterns, which have no
        unique fiber root.
        """
        key = (int(np.sign(f_sign)), int(np.sign(g_sign)))
        if key == (0, 0):
            return None
        for case, signs in _CASE_SIGNS.items():
            if signs == key:
                return case
        raise CaseMismatch(
            f"Sign pattern (F, G) = {key} is not one of the six admissible cases "
            "(F and G must not share a sign)"
        )


_CASE_SIGNS = {
    SignCase.I: (1, 0),
    SignCase.II: (-1, 0),
    SignCase.III: (0, 1),
    SignCase.IV: (0, -1),
    SignCase.V: (1, -1),
    SignCase.VI: (-1, 1),
}

NEGATIVE_ENERGIES = EnergyInterval(-math.inf, 0.0)
POSITIVE_ENERGIES = EnergyInterval(0.0, math.inf)


def admissible_energy_interval(case: SignCase) -> EnergyInterval:
    """(-inf, 0) for cases I, IV, V and (0, inf) for II, III, VI."""
    if case in (SignCase.I, SignCase.IV, SignCase.V):
        return NEGATIVE_ENERGIES
    return POSITIVE_ENERGIES


def classify_term(exponents: ScalingExponents, degree: float) -> str:
    """A term growing like t^degree is subscaled below s and superscaled above it."""
    if degree < exponents.s:
        return "subscaled"
    if degree > exponents.s:
        return "superscaled"
    return "scaled"


class PredictedLimits(NamedTuple):
    """Limits of c -> lambda_{c,1} at the lower and upper end of the energy interval."""

    at_lower: float
    at_upper: float


def predicted_limits(case: SignCase, lambda1: float) -> PredictedLimits:
    """
    Directional limits of the first energy curve.

    The curve decreases in c; the end where it stays finite tends to lambda1,
    the other end diverges. Mixed cases diverge at both ends.
    """
    inf = math.inf
    table = {
        SignCase.I: (lambda1, -inf),
        SignCase.II: (inf, lambda1),
        SignCase.III: (lambda1, -inf),
        SignCase.IV: (inf, lambda1),
        SignCase.V: (inf, -inf),
        SignCase.VI: (inf, -inf),
    }
    return PredictedLimits(*table[case])


@dataclass(frozen=True)
class FunctionalValues:
    i_s: float
    j_s: float
    f: float
    g: float


@dataclass(frozen=True)
class FiberSolution:
    t: float
    residual: float
    method: str  # "closed-form" or "bisection-newton"


class LambdaTildeForms(NamedTuple):
    """The three algebraically equivalent expressions of Lambda~_c at t_c(u)."""

    direct: float
    without_g: float
    without_c: float


class ScaledProblem(ABC):
    """
    Contract for a discretised scaled problem.

    States are 1-D numpy arrays of nodal values. Subclasses supply the four
    potentials, their Euclidean gradients (dual vectors), the scaling action
    and a symmetric positive definite metric P used for Riesz representatives.
    A problem is immutable after construction.
    """

    exponents: ScalingExponents
    case: "SignCase | None"
    coordinate_name: str
    amplitude_degrees: tuple[float, float]

    @property
    @abstractmethod
    def coordinates(self) -> np.ndarray: ...

    @abstractmethod
    def eval_I(self, u: np.ndarray) -> float: ...

    @abstractmethod
    def eval_J(self, u: np.ndarray) -> float: ...

    @abstractmethod
    def eval_F(self, u: np.ndarray) -> float: ...

    @abstractmethod
    def eval_G(self, u: np.ndarray) -> float: ...

    @abstractmethod
    def grad_I(self, u: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def grad_J(self, u: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def grad_F(self, u: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def grad_G(self, u: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def scale(self, u: np.ndarray, t: float) -> np.ndarray: ...

    @abstractmethod
    def metric_apply(self, v: np.ndarray) -> np.ndarray:
        """P v."""

    @abstractmethod
    def riesz(self, dual: np.ndarray) -> np.ndarray:
        """P^{-1} dual."""

    @abstractmethod
    def metric_diagonal(self) -> np.ndarray: ...

    @abstractmethod
    def describe(self) -> dict: ...

    @property
    def size(self) -> int:
        return len(self.coordinates)

    def check_state(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.size,):
            raise GridMismatch(f"State has shape {u.shape}, grid expects ({self.size},)")
        return u

    def apply_As(self, u, v) -> float:
        return float(self.grad_I(u) @ self.check_state(v))

    def apply_Bs(self, u, v) -> float:
        return float(self.grad_J(u) @ self.check_state(v))

    def apply_f(self, u, v) -> float:
        return float(self.grad_F(u) @ self.check_state(v))

    def apply_g(self, u, v) -> float:
        return float(self.grad_G(u) @ self.check_state(v))

    def inner(self, a, b) -> float:
        return float(np.asarray(a) @ self.metric_apply(np.asarray(b)))

    def norm(self, u) -> float:
        return math.sqrt(max(self.inner(u, u), 0.0))

    def values(self, u) -> FunctionalValues:
        u = self.check_state(u)
        return FunctionalValues(self.eval_I(u), self.eval_J(u), self.eval_F(u), self.eval_G(u))

    def retract(self, u: np.ndarray) -> np.ndarray:
        """Map a nonzero state onto M_s. The default uses the scaling action."""
        _, pi_u = project_to_sphere(self, u)
        return pi_u

    def amplitude_to_nehari(self, u: np.ndarray, c: float) -> np.ndarray:
        """
        Multiply u by the unique kappa > 0 that puts kappa*u on N_c.

        F and G are homogeneous in amplitude with degrees ``amplitude_degrees``,
        so the Nehari equation in kappa has the same monotone structure as the
        fiber equation.
        """
        require_admissible(self.case, c)
        u = self.check_state(u)
        e = self.exponents
        f, g = self.eval_F(u), self.eval_G(u)
        _check_signs(self.case, f, g)
        a, b = self.amplitude_degrees
        kappa, _, _ = _solve_balance(
            (e.s - e.q) * f, a, -(e.r - e.s) * g, b, c * e.s, FIBER_RTOL * (1 + abs(c) * e.s)
        )
        return kappa * u


def require_admissible(case: "SignCase | None", c: float) -> EnergyInterval:
    if case is None:
        raise CaseMismatch("Energy-prescribed quantities need one of the six sign cases; F = G = 0 here")
    interval = admissible_energy_interval(case)
    if not interval.contains(c):
        raise CaseMismatch(f"Energy c={c:g} lies outside the admissible interval {interval} of case {case.value}")
    return interval


def _check_signs(case: SignCase, f: float, g: float):
    for name, value, want in (("F", f, case.f_sign), ("G", g, case.g_sign)):
        ok = value > 0 if want > 0 else value < 0 if want < 0 else value == 0
        if not ok:
            raise CaseMismatch(f"{name}(u)={value:g} has the wrong sign for case {case.value}")


def _solve_balance(a_coef, a_exp, b_coef, b_exp, const, tol) -> tuple[float, float, str]:
    """
    Positive root of h(t) = a_coef t^a_exp + b_coef t^b_exp + const.

    Callers guarantee the power terms share a sign opposite to const (or one
    of them vanishes), so h is strictly monotone on (0, inf).
    """

    def h(t):
        return a_coef * t**a_exp + b_coef * t**b_exp + const

    if b_coef == 0.0 or a_coef == 0.0:
        coef, exp = (a_coef, a_exp) if b_coef == 0.0 else (b_coef, b_exp)
        t = (-const / coef) ** (1.0 / exp)
        return t, h(t), "closed-form"

    def dh(t):
        return a_coef * a_exp * t ** (a_exp - 1) + b_coef * b_exp * t ** (b_exp - 1)

    side = math.copysign(1.0, const)
    lo, hi = _BRACKET_LO, 1.0
    while h(hi) * side > 0:
        lo, hi = hi, hi * 2.0
        if hi > _BRACKET_CAP:
            raise NoConvergence(f"Fiber root not bracketed below t={_BRACKET_CAP:g}")
    while h(lo) * side < 0:
        lo, hi = lo * 0.5, lo
        if lo < _BRACKET_FLOOR:
            raise NoConvergence(f"Fiber root not bracketed above t={_BRACKET_FLOOR:g}")

    t0 = optimize.bisect(h, lo, hi, xtol=lo * 1e-6, rtol=1e-3)
    try:
        t = optimize.newton(h, t0, fprime=dh, tol=1e-14 * t0, maxiter=50)
    except (RuntimeError, OverflowError, ZeroDivisionError):
        t = math.nan
    if not (lo <= t <= hi) or abs(h(t)) > tol:
        logger.debug("Newton polish left the bracket, falling back to brentq")
        t = optimize.brentq(h, lo, hi, xtol=lo * 1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    residual = h(t)
    if abs(residual) > tol:
        raise NoConvergence(f"Fiber residual {residual:.3e} exceeds tolerance {tol:.3e}")
    return t, residual, "bisection-newton"


# --- value-level kernels ----------------------------------------------------


def fiber_residual_value(exponents: ScalingExponents, f: float, g: float, c: float, t: float) -> float:
    e = exponents
    return (e.s - e.q) * t**e.q * f - (e.r - e.s) * t**e.r * g + c * e.s


def solve_fiber(exponents: ScalingExponents, case: "SignCase | None", f: float, g: float, c: float) -> FiberSolution:
    """
    Unique positive t with (s-q) t^q f - (r-s) t^r g + c s = 0.

    Works for the raw values of any nonzero state; for a state on M_s the
    result is the fiber time t_c(u).
    """
    require_admissible(case, c)
    _check_signs(case, f, g)
    e = exponents
    tol = FIBER_RTOL * (1 + abs(c) * e.s)
    t, residual, method = _solve_balance((e.s - e.q) * f, e.q, -(e.r - e.s) * g, e.r, c * e.s, tol)
    if abs(residual) > tol:
        raise NoConvergence(f"Fiber residual {residual:.3e} exceeds tolerance {tol:.3e}")
    return FiberSolution(t=t, residual=residual, method=method)


def lambda_c_from_values(values: FunctionalValues, c: float) -> float:
    if values.j_s <= TOL_ZERO:
        raise ZeroState(f"J_s(u)={values.j_s:g} vanishes")
    return (values.i_s - values.f - values.g - c) / values.j_s


def lambda_tilde_forms(exponents: ScalingExponents, values: FunctionalValues, c: float, t: float) -> LambdaTildeForms:
    """
    Lambda~_c written three ways at a fiber root t.

    ``direct`` keeps every term, ``without_g`` eliminates G and ``without_c``
    eliminates c through the fiber equation. With i_s = 1 these are the sphere
    formulas; for other i_s they give Lambda~_c of the projected state.
    """
    e = exponents
    i, j, f, g = values.i_s, values.j_s, values.f, values.g
    tf = t ** (e.q - e.s) * f
    tg = t ** (e.r - e.s) * g
    tc = c * t ** (-e.s)
    direct = (i - tf - tg - tc) / j
    without_g = ((e.r - e.s) * i - (e.r - e.q) * tf - c * e.r * t ** (-e.s)) / ((e.r - e.s) * j)
    without_c = (e.s * i - e.q * tf - e.r * tg) / (e.s * j)
    return LambdaTildeForms(direct, without_g, without_c)


def closed_form_value(exponents: ScalingExponents, case: "SignCase | None", values: FunctionalValues, c: float) -> float:
    """Pure-case closed form of Lambda~_c (no fiber solve)."""
    require_admissible(case, c)
    _check_signs(case, values.f, values.g)
    e = exponents
    i, j = values.i_s, values.j_s
    if case is SignCase.I:
        corr = (e.q / e.s) * ((e.s - e.q) / (abs(c) * e.s)) ** ((e.s - e.q) / e.q) * values.f ** (e.s / e.q)
        return (i - corr) / j
    if case is SignCase.II:
        corr = (e.q / e.s) * ((e.s - e.q) / (c * e.s)) ** ((e.s - e.q) / e.q) * abs(values.f) ** (e.s / e.q)
        return (i + corr) / j
    if case is SignCase.III:
        corr = (e.r / e.s) * (c * e.s / (e.r - e.s)) ** ((e.r - e.s) / e.r) * values.g ** (e.s / e.r)
        return (i - corr) / j
    if case is SignCase.IV:
        corr = (e.r / e.s) * (abs(c) * e.s / (e.r - e.s)) ** ((e.r - e.s) / e.r) * abs(values.g) ** (e.s / e.r)
        return (i + corr) / j
    raise CaseMismatch(f"No closed form for mixed case {case.value}")


# --- state-level operations -------------------------------------------------


def _nonzero_values(p: ScaledProblem, u) -> FunctionalValues:
    vals = p.values(u)
    if vals.i_s <= TOL_ZERO or vals.j_s <= TOL_ZERO:
        raise ZeroState(f"State is numerically zero (I_s={vals.i_s:g}, J_s={vals.j_s:g})")
    return vals


def project_to_sphere(p: ScaledProblem, u) -> tuple[float, np.ndarray]:
    """Return (t_u, u_{t_u}) with t_u = I_s(u)^(-1/s)."""
    u = p.check_state(u)
    i_s = p.eval_I(u)
    if i_s <= TOL_ZERO:
        raise ZeroState(f"I_s(u)={i_s:g} is below the zero threshold {TOL_ZERO:g}")
    t_u = i_s ** (-1.0 / p.exponents.s)
    if t_u == 1.0:
        return t_u, u.copy()
    return t_u, p.scale(u, t_u)


def fiber_residual(p: ScaledProblem, u, c: float, t: float) -> float:
    if t <= 0:
        raise ValueError(f"Fiber time must be positive, got {t}")
    u = p.check_state(u)
    return fiber_residual_value(p.exponents, p.eval_F(u), p.eval_G(u), c, t)


def solve_fiber_time(p: ScaledProblem, u, c: float) -> FiberSolution:
    vals = _nonzero_values(p, u)
    return solve_fiber(p.exponents, p.case, vals.f, vals.g, c)


def lambda_c_value(p: ScaledProblem, u, c: float) -> float:
    """lambda_c(u) = (I_s - F - G - c) / J_s."""
    return lambda_c_from_values(p.values(u), c)


def phi_lambda(p: ScaledProblem, u, lam: float) -> float:
    vals = p.values(u)
    return vals.i_s - lam * vals.j_s - vals.f - vals.g


def nehari_residual(p: ScaledProblem, v, c: float) -> float:
    e = p.exponents
    v = p.check_state(v)
    return (e.s - e.q) * p.eval_F(v) - (e.r - e.s) * p.eval_G(v) + c * e.s


def big_lambda_c(p: ScaledProblem, v, c: float) -> float:
    """Lambda_c on N_c: ((r-s) I_s - (r-q) F - c r) / ((r-s) J_s)."""
    e = p.exponents
    vals = _nonzero_values(p, v)
    residual = (e.s - e.q) * vals.f - (e.r - e.s) * vals.g + c * e.s
    scale = e.s * vals.i_s + (e.s - e.q) * abs(vals.f) + (e.r - e.s) * abs(vals.g) + e.s * abs(c)
    if abs(residual) > NEHARI_RTOL * scale:
        raise NotOnNehari(f"Nehari residual {residual:.3e} exceeds {NEHARI_RTOL:g} relative to {scale:.3e}")
    return ((e.r - e.s) * vals.i_s - (e.r - e.q) * vals.f - c * e.r) / ((e.r - e.s) * vals.j_s)


def psi_tilde(p: ScaledProblem, u) -> float:
    """I_s(u) / J_s(u); equals 1/J_s on the sphere and is invariant along scaling rays."""
    vals = _nonzero_values(p, u)
    return vals.i_s / vals.j_s


def lambda_tilde(p: ScaledProblem, u, c: float) -> tuple[float, FiberSolution]:
    """
    Lambda~_c(u) = lambda_c(u_{t_c(u)}) for u on the sphere.

    For a state off the sphere the value is that of its projection and the
    returned time carries u itself onto N_c.
    """
    vals = _nonzero_values(p, u)
    fiber = solve_fiber(p.exponents, p.case, vals.f, vals.g, c)
    return lambda_tilde_forms(p.exponents, vals, c, fiber.t).direct, fiber


def lambda_tilde_all_forms(p: ScaledProblem, u, c: float) -> LambdaTildeForms:
    vals = _nonzero_values(p, u)
    fiber = solve_fiber(p.exponents, p.case, vals.f, vals.g, c)
    return lambda_tilde_forms(p.exponents, vals, c, fiber.t)


def dlambda_tilde_dc(p: ScaledProblem, u, c: float) -> float:
    """-t_c(u)^(-s) / J_s(u); the fiber time drops out by the envelope property."""
    vals = _nonzero_values(p, u)
    fiber = solve_fiber(p.exponents, p.case, vals.f, vals.g, c)
    return -(fiber.t ** (-p.exponents.s)) / vals.j_s


def closed_form_lambda_tilde(p: ScaledProblem, u, c: float) -> float:
    return closed_form_value(p.exponents, p.case, _nonzero_values(p, u), c)


def pohozaev_residual(p: ScaledProblem, u, alpha: float, beta: float, gamma: float, delta: float) -> float:
    e = p.exponents
    vals = p.values(u)
    return e.s * alpha * vals.i_s - e.s * beta * vals.j_s - e.q * gamma * vals.f - e.r * delta * vals.g


def h_pairing(p: ScaledProblem, v) -> float:
    """(s-q) f(v)v - (r-s) g(v)v, the pairing of the Nehari constraint derivative with v."""
    e = p.exponents
    return (e.s - e.q) * p.apply_f(v, v) - (e.r - e.s) * p.apply_g(v, v)


def lambda_c_gradient(p: ScaledProblem, u, c: float) -> np.ndarray:
    """Euclidean gradient (dual vector) of lambda_c at u."""
    u = p.check_state(u)
    vals = _nonzero_values(p, u)
    lam = lambda_c_from_values(vals, c)
    return (p.grad_I(u) - lam * p.grad_J(u) - p.grad_F(u) - p.grad_G(u)) / vals.j_s


def grad_lambda_c(p: ScaledProblem, u, c: float) -> np.ndarray:
    """Riesz representative of lambda_c'(u) in the problem metric."""
    return p.riesz(lambda_c_gradient(p, u, c))


def reduced_lambda_tilde(p: ScaledProblem, u, c: float) -> tuple[float, np.ndarray, FiberSolution]:
    """
    Lambda~_c with its exact Euclidean gradient.

    The value is (I - T^(q-s) F - T^(r-s) G - c T^(-s)) / J with T the raw
    fiber root of u. Since dLambda/dT vanishes at the root, only the explicit
    dependence on u differentiates.
    """
    u = p.check_state(u)
    e = p.exponents
    vals = _nonzero_values(p, u)
    fiber = solve_fiber(e, p.case, vals.f, vals.g, c)
    t = fiber.t
    value = lambda_tilde_forms(e, vals, c, t).direct
    grad = p.grad_I(u) - value * p.grad_J(u)
    if vals.f != 0.0:
        grad = grad - t ** (e.q - e.s) * p.grad_F(u)
    if vals.g != 0.0:
        grad = grad - t ** (e.r - e.s) * p.grad_G(u)
    return value, grad / vals.j_s, fiber


def reduced_psi(p: ScaledProblem, u) -> tuple[float, np.ndarray]:
    """I/J with its Euclidean gradient."""
    u = p.check_state(u)
    vals = _nonzero_values(p, u)
    value = vals.i_s / vals.j_s
    return value, (p.grad_I(u) - value * p.grad_J(u)) / vals.j_s


def nehari_constraint_gradient(p: ScaledProblem, v) -> np.ndarray:
    e = p.exponents
    return (e.s - e.q) * p.grad_F(v) - (e.r - e.s) * p.grad_G(v)


def nehari_multiplier(p: ScaledProblem, v, c: float) -> float:
    """
    Least-squares mu with lambda_c'(v) ~ mu * (Nehari constraint)'(v).

    At a critical point of lambda_c restricted to N_c the constraint is
    natural, so mu vanishes up to solver accuracy.
    """
    dual = lambda_c_gradient(p, v, c)
    normal = nehari_constraint_gradient(p, v)
    riesz_normal = p.riesz(normal)
    denom = float(normal @ riesz_normal)
    if denom <= 0.0:
        return 0.0
    return float(dual @ riesz_normal) / denom
