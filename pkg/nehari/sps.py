"""
sps.py

Radial Schrodinger-Poisson-Slater problem as a scaled problem.

States are nodal values u(r_i) on a log-spaced radial grid. With the scaling
u_t(x) = t^2 u(t x) the potentials

    I = (1/2) int |grad u|^2 + D(u) / (16 pi),   J = (1/3) int |u|^3,
    F = sign_sigma (1/sigma) int |u|^sigma,      G = sign_tau (1/tau) int |u|^tau

have degrees s = 3, q = 2 sigma - 3 and r = 2 tau - 3. D is the Coulomb
double integral, evaluated in O(n) through Newton's shell theorem.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.interpolate import CubicSpline

from nehari.core import ScaledProblem, ScalingExponents, SignCase
from nehari.errors import CaseMismatch, ConfigError, ZeroState

logger = logging.getLogger(__name__)

SIGMA_WINDOW = (18.0 / 7.0, 3.0)
TAU_WINDOW = (3.0, 6.0)
MIN_NODES = 64
FOUR_PI = 4.0 * math.pi


class RadialGrid:
    """
    Log-spaced nodes r_1 < ... < r_n with shell quadrature.

    Each panel [r_p, r_{p+1}] carries its exact shell volume 4 pi (r_{p+1}^3 - r_p^3) / 3,
    split evenly between its two nodes; the ball of radius r_1 is added to the
    first node.
    """

    def __init__(self, n: int = 512, r_min: float = 1e-3, r_max: float = 60.0, r_char: float = 1.0):
        if n < MIN_NODES:
            raise ConfigError(f"Radial grid needs n >= {MIN_NODES} nodes, got {n}")
        if not (0.0 < r_min <= 1e-3 * r_char):
            raise ConfigError(f"r_min={r_min} must lie in (0, 1e-3 * r_char] = (0, {1e-3 * r_char:g}]")
        if r_max < 50.0 * r_char:
            raise ConfigError(f"r_max={r_max} must be at least 50 * r_char = {50.0 * r_char:g}")
        self.n, self.r_min, self.r_max, self.r_char = int(n), float(r_min), float(r_max), float(r_char)

        self.nodes = np.geomspace(self.r_min, self.r_max, self.n)
        self.log_nodes = np.log(self.nodes)
        self.panel_widths = np.diff(self.nodes)
        self.panel_volumes = FOUR_PI / 3.0 * np.diff(self.nodes**3)

        w = np.zeros(self.n)
        w[:-1] += 0.5 * self.panel_volumes
        w[1:] += 0.5 * self.panel_volumes
        w[0] += FOUR_PI / 3.0 * self.r_min**3
        self.weights = w

        # k_p = V_p / dr_p^2 so that int |grad u|^2 = sum_p k_p (u_{p+1} - u_p)^2
        self.panel_stiffness = self.panel_volumes / self.panel_widths**2

    def describe(self) -> dict:
        return {"n": self.n, "r_min": self.r_min, "r_max": self.r_max, "r_char": self.r_char}


@dataclass(frozen=True)
class SpsNonlinearity:
    """Exponents and signs of the two power terms; a zero sign removes the term."""

    sigma: float = 2.7
    tau: float = 4.0
    sign_sigma: int = 1
    sign_tau: int = 0

    def __post_init__(self):
        for name, sign in (("sign_sigma", self.sign_sigma), ("sign_tau", self.sign_tau)):
            if sign not in (-1, 0, 1):
                raise ConfigError(f"{name}={sign} must be one of -1, 0, +1")
        lo, hi = SIGMA_WINDOW
        if self.sign_sigma != 0 and not (lo < self.sigma < hi):
            raise ConfigError(f"sigma={self.sigma} outside the window (18/7, 3)")
        lo, hi = TAU_WINDOW
        if self.sign_tau != 0 and not (lo < self.tau < hi):
            raise ConfigError(f"tau={self.tau} outside the window (3, 6)")
        try:
            ScalingExponents(3.0, self.q, self.r)
            SignCase.from_signs(self.sign_sigma, self.sign_tau)
        except (ValueError, CaseMismatch) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def q(self) -> float:
        return 2.0 * self.sigma - 3.0

    @property
    def r(self) -> float:
        return 2.0 * self.tau - 3.0

    @property
    def case(self) -> "SignCase | None":
        return SignCase.from_signs(self.sign_sigma, self.sign_tau)


def dirichlet_energy(grid: RadialGrid, u) -> float:
    """int |grad u|^2 dx from panel differences weighted by exact shell volumes."""
    du = np.diff(np.asarray(u, dtype=float))
    return float(grid.panel_stiffness @ (du * du))


def newton_potential(grid: RadialGrid, u) -> np.ndarray:
    """
    phi(r_i) = (1/r_i) sum_{j<=i} w_j u_j^2 + sum_{j>i} w_j u_j^2 / r_j.

    Shell theorem: the mass inside r acts as a point charge, outer shells
    contribute a constant.
    """
    rho = grid.weights * np.asarray(u, dtype=float) ** 2
    inner = np.cumsum(rho) / grid.nodes
    outer_density = rho / grid.nodes
    outer = outer_density.sum() - np.cumsum(outer_density)
    return inner + outer


def coulomb_energy(grid: RadialGrid, u) -> float:
    """D(u) = int int u^2(x) u^2(y) / |x - y|, O(n) via prefix sums."""
    rho = grid.weights * np.asarray(u, dtype=float) ** 2
    return float(rho @ newton_potential(grid, u))


def coulomb_energy_direct(grid: RadialGrid, u) -> float:
    """O(n^2) double sum with the radial kernel 1/max(r_i, r_j). Reference only."""
    rho = grid.weights * np.asarray(u, dtype=float) ** 2
    kernel = 1.0 / np.maximum.outer(grid.nodes, grid.nodes)
    return float(rho @ kernel @ rho)


def scale_function(grid: RadialGrid, u, t: float) -> np.ndarray:
    """
    v(r_i) = t^2 u~(t r_i), u~ the not-a-knot cubic spline of u in log r.

    u~ is zero beyond r_max and continues linearly in log r below r_min. The
    map is linear in u; t = 1 and t = 0 are exact.
    """
    if t < 0:
        raise ValueError(f"Scaling parameter must be nonnegative, got {t}")
    u = np.asarray(u, dtype=float)
    if t == 1.0:
        return u.copy()
    if t == 0.0:
        return np.zeros_like(u)
    x = grid.log_nodes
    spline = CubicSpline(x, u)
    target = x + math.log(t)
    out = np.zeros_like(u)
    inside = (target >= x[0]) & (target <= x[-1])
    out[inside] = spline(target[inside])
    below = target < x[0]
    if below.any():
        slope = float(spline(x[0], 1))
        out[below] = u[0] + slope * (target[below] - x[0])
    return t**2 * out


class SpsProblem(ScaledProblem):
    """
    Schrodinger-Poisson-Slater instantiation.

    The Riesz metric is the radial stiffness plus ``metric_shift`` times the
    mass matrix (an H^1 inner product).
    """

    coordinate_name = "r"

    def __init__(self, grid: RadialGrid | None = None, nonlinearity: SpsNonlinearity | None = None,
                 metric_shift: float = 1.0):
        self.grid = grid if grid is not None else RadialGrid()
        self.nonlinearity = nonlinearity if nonlinearity is not None else SpsNonlinearity()
        if metric_shift <= 0:
            raise ConfigError(f"metric_shift must be positive, got {metric_shift}")
        self.metric_shift = float(metric_shift)
        nl = self.nonlinearity
        self.exponents = ScalingExponents(3.0, nl.q, nl.r)
        self.amplitude_degrees = (nl.sigma, nl.tau)
        self.case = nl.case

        k = self.grid.panel_stiffness
        n = self.grid.n
        self._stiff_diag = np.zeros(n)
        self._stiff_diag[:-1] += k
        self._stiff_diag[1:] += k
        self._stiff_off = -k
        self._metric_diag = self._stiff_diag + self.metric_shift * self.grid.weights
        self._banded = np.zeros((3, n))
        self._banded[0, 1:] = self._stiff_off
        self._banded[1, :] = self._metric_diag
        self._banded[2, :-1] = self._stiff_off

    @property
    def coordinates(self) -> np.ndarray:
        return self.grid.nodes

    def describe(self) -> dict:
        nl = self.nonlinearity
        return {
            "model": "sps",
            **self.grid.describe(),
            "sigma": nl.sigma,
            "tau": nl.tau,
            "sign_sigma": nl.sign_sigma,
            "sign_tau": nl.sign_tau,
            "metric_shift": self.metric_shift,
            "case": self.case.value if self.case else None,
        }

    def stiffness_apply(self, u: np.ndarray) -> np.ndarray:
        su = self._stiff_diag * u
        su[:-1] += self._stiff_off * u[1:]
        su[1:] += self._stiff_off * u[:-1]
        return su

    def eval_I(self, u) -> float:
        u = self.check_state(u)
        return 0.5 * dirichlet_energy(self.grid, u) + coulomb_energy(self.grid, u) / (4.0 * FOUR_PI)

    def eval_J(self, u) -> float:
        u = self.check_state(u)
        return float(self.grid.weights @ np.abs(u) ** 3) / 3.0

    def _power(self, u, exponent: float, sign: int) -> float:
        if sign == 0:
            return 0.0
        u = self.check_state(u)
        return sign / exponent * float(self.grid.weights @ np.abs(u) ** exponent)

    def eval_F(self, u) -> float:
        return self._power(u, self.nonlinearity.sigma, self.nonlinearity.sign_sigma)

    def eval_G(self, u) -> float:
        return self._power(u, self.nonlinearity.tau, self.nonlinearity.sign_tau)

    def grad_I(self, u) -> np.ndarray:
        u = self.check_state(u)
        phi = newton_potential(self.grid, u)
        return self.stiffness_apply(u) + self.grid.weights * u * phi / FOUR_PI

    def grad_J(self, u) -> np.ndarray:
        u = self.check_state(u)
        return self.grid.weights * np.abs(u) * u

    def _power_grad(self, u, exponent: float, sign: int) -> np.ndarray:
        u = self.check_state(u)
        if sign == 0:
            return np.zeros_like(u)
        return sign * self.grid.weights * np.sign(u) * np.abs(u) ** (exponent - 1.0)

    def grad_F(self, u) -> np.ndarray:
        return self._power_grad(u, self.nonlinearity.sigma, self.nonlinearity.sign_sigma)

    def grad_G(self, u) -> np.ndarray:
        return self._power_grad(u, self.nonlinearity.tau, self.nonlinearity.sign_tau)

    def scale(self, u, t: float) -> np.ndarray:
        return scale_function(self.grid, self.check_state(u), t)

    def metric_apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.stiffness_apply(v) + self.metric_shift * self.grid.weights * v

    def riesz(self, dual) -> np.ndarray:
        return linalg.solve_banded((1, 1), self._banded, np.asarray(dual, dtype=float), check_finite=False)

    def metric_diagonal(self) -> np.ndarray:
        return self._metric_diag.copy()

    def retract(self, u) -> np.ndarray:
        """
        Amplitude retraction onto I = 1: solve b k^2 + a k^4 = 1 with
        b = (1/2) int |grad u|^2 and a = D(u) / (16 pi).
        """
        u = self.check_state(u)
        b = 0.5 * dirichlet_energy(self.grid, u)
        a = coulomb_energy(self.grid, u) / (4.0 * FOUR_PI)
        if a + b <= 1e-24:
            raise ZeroState("Cannot retract a zero state onto the sphere")
        kappa_sq = 2.0 / (b + math.sqrt(b * b + 4.0 * a))
        return math.sqrt(kappa_sq) * u


def norm_E(p: SpsProblem, u) -> float:
    """[int |grad u|^2 + D(u)^(1/2)]^(1/2)."""
    u = p.check_state(u)
    return math.sqrt(dirichlet_energy(p.grid, u) + math.sqrt(coulomb_energy(p.grid, u)))


def norm_scaling_bound(p: SpsProblem, u, t: float) -> float:
    """max(t^(3/2), t^(3/4)) norm_E(u), an upper bound for norm_E(u_t)."""
    return max(t**1.5, t**0.75) * norm_E(p, u)


def sps_h_pairing(p: SpsProblem, u) -> float:
    """h(u)u = 2[(3 - sigma) f(u)u - (tau - 3) g(u)u]."""
    nl = p.nonlinearity
    return 2.0 * ((3.0 - nl.sigma) * p.apply_f(u, u) - (nl.tau - 3.0) * p.apply_g(u, u))


def pohozaev_check_sps(p: SpsProblem, u, alpha: float, beta: float, gamma: float,
                       delta: float) -> tuple[float, float]:
    """
    Residuals of the two integral identities of alpha A(u) = beta B(u) + gamma f(u) + delta g(u).

    The first tests the equation with u, the second is the dilation (Pohozaev)
    identity. Two thirds of the first minus one third of the second, times 3,
    is the scaled Pohozaev residual with s = 3.
    """
    u = p.check_state(u)
    nl = p.nonlinearity
    w = p.grid.weights
    grad_sq = dirichlet_energy(p.grid, u)
    d = coulomb_energy(p.grid, u)
    cube = float(w @ np.abs(u) ** 3)
    p_sigma = nl.sign_sigma * float(w @ np.abs(u) ** nl.sigma) if nl.sign_sigma else 0.0
    p_tau = nl.sign_tau * float(w @ np.abs(u) ** nl.tau) if nl.sign_tau else 0.0

    euler = alpha * (grad_sq + d / FOUR_PI) - beta * cube - gamma * p_sigma - delta * p_tau
    pohozaev = (alpha * (0.5 * grad_sq + 5.0 * d / (4.0 * FOUR_PI)) - beta * cube
                - 3.0 * gamma * p_sigma / nl.sigma - 3.0 * delta * p_tau / nl.tau)
    return euler, pohozaev
