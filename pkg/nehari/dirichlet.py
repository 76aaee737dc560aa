"""
dirichlet.py

The 1-D Dirichlet problem -u'' = lambda u + mu |u|^(sigma-2) u + nu |u|^(tau-2) u
on (0, 1) as a scaled problem under the standard scaling (u, t) -> t u.

Exponents are s = 2, q = sigma, r = tau. The grid has n interior nodes with
spacing h = 1/(n+1); boundary values are zero and never stored.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from nehari.core import ScaledProblem, ScalingExponents, SignCase
from nehari.errors import ConfigError, NoConvergence

logger = logging.getLogger(__name__)

MIN_NODES = 63
DEFAULT_TAU_CAP = 6.0


@dataclass(frozen=True, eq=False)
class IntervalGrid:
    n: int

    def __post_init__(self):
        if self.n < MIN_NODES:
            raise ConfigError(f"Interval grid needs n >= {MIN_NODES} interior nodes, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)


class DirichletProblem(ScaledProblem):
    """
    Finite-difference Dirichlet problem.

    I = (1/2) sum h ((u_{i+1}-u_i)/h)^2, J = (1/2) h sum u^2,
    F = (mu/sigma) h sum |u|^sigma, G = (nu/tau) h sum |u|^tau.
    A zero coefficient removes its term; mu = nu = 0 is the plain eigenvalue problem.
    """

    coordinate_name = "x"

    def __init__(self, n: int = 511, sigma: float = 1.5, tau: float = 4.0, mu: float = 1.0, nu: float = 0.0,
                 tau_cap: float = DEFAULT_TAU_CAP):
        if not (1.0 < sigma < 2.0):
            raise ConfigError(f"sigma={sigma} outside the window (1, 2)")
        if not (2.0 < tau <= tau_cap):
            raise ConfigError(f"tau={tau} outside the window (2, {tau_cap:g}]")
        if mu * nu > 0:
            raise ConfigError(f"mu*nu must be <= 0, got mu={mu}, nu={nu}")
        self.grid = IntervalGrid(n)
        self.sigma, self.tau, self.mu, self.nu = float(sigma), float(tau), float(mu), float(nu)
        self.tau_cap = float(tau_cap)
        self.exponents = ScalingExponents(2.0, self.sigma, self.tau)
        self.amplitude_degrees = (self.sigma, self.tau)
        self.case = SignCase.from_signs(int(np.sign(mu)), int(np.sign(nu)))

        h = self.grid.h
        # Stiffness K = (1/h) tridiag(-1, 2, -1) so that I = u^T K u / 2.
        self._diag = np.full(n, 2.0 / h)
        self._off = np.full(n - 1, -1.0 / h)
        self._banded = np.zeros((3, n))
        self._banded[0, 1:] = self._off
        self._banded[1, :] = self._diag
        self._banded[2, :-1] = self._off

    @property
    def coordinates(self) -> np.ndarray:
        return self.grid.nodes

    def describe(self) -> dict:
        return {
            "model": "dirichlet-1d",
            "n": self.grid.n,
            "sigma": self.sigma,
            "tau": self.tau,
            "mu": self.mu,
            "nu": self.nu,
            "case": self.case.value if self.case else None,
        }

    def _stiffness(self, u: np.ndarray) -> np.ndarray:
        ku = self._diag * u
        ku[:-1] += self._off * u[1:]
        ku[1:] += self._off * u[:-1]
        return ku

    def eval_I(self, u) -> float:
        u = self.check_state(u)
        jumps = np.diff(u, prepend=0.0, append=0.0)
        return 0.5 * float(jumps @ jumps) / self.grid.h

    def eval_J(self, u) -> float:
        u = self.check_state(u)
        return 0.5 * self.grid.h * float(u @ u)

    def eval_F(self, u) -> float:
        if self.mu == 0.0:
            return 0.0
        u = self.check_state(u)
        return self.mu / self.sigma * self.grid.h * float(np.sum(np.abs(u) ** self.sigma))

    def eval_G(self, u) -> float:
        if self.nu == 0.0:
            return 0.0
        u = self.check_state(u)
        return self.nu / self.tau * self.grid.h * float(np.sum(np.abs(u) ** self.tau))

    def grad_I(self, u) -> np.ndarray:
        return self._stiffness(self.check_state(u))

    def grad_J(self, u) -> np.ndarray:
        return self.grid.h * self.check_state(u)

    def grad_F(self, u) -> np.ndarray:
        u = self.check_state(u)
        if self.mu == 0.0:
            return np.zeros_like(u)
        return self.mu * self.grid.h * np.sign(u) * np.abs(u) ** (self.sigma - 1.0)

    def grad_G(self, u) -> np.ndarray:
        u = self.check_state(u)
        if self.nu == 0.0:
            return np.zeros_like(u)
        return self.nu * self.grid.h * np.sign(u) * np.abs(u) ** (self.tau - 1.0)

    def scale(self, u, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError(f"Scaling parameter must be nonnegative, got {t}")
        return t * self.check_state(u)

    def metric_apply(self, v) -> np.ndarray:
        return self._stiffness(np.asarray(v, dtype=float))

    def riesz(self, dual) -> np.ndarray:
        return linalg.solve_banded((1, 1), self._banded, np.asarray(dual, dtype=float), check_finite=False)

    def metric_diagonal(self) -> np.ndarray:
        return self._diag.copy()

    # eval_*_1d names mirror the operations of the model description
    eval_I_1d = eval_I
    eval_J_1d = eval_J
    eval_F_1d = eval_F
    eval_G_1d = eval_G


def rayleigh_lambda1(p: DirichletProblem) -> tuple[float, np.ndarray]:
    """
    Smallest eigenvalue of K/h (the minimum of I/J) and its eigenvector scaled onto I = 1.

    This is the tridiagonal eigensolve oracle; the optimizer must reproduce it.
    """
    h = p.grid.h
    try:
        w, v = linalg.eigh_tridiagonal(
            p._diag / h, p._off / h, select="i", select_range=(0, 0)
        )
    except linalg.LinAlgError as exc:
        raise NoConvergence(f"Tridiagonal eigensolve failed: {exc}") from exc
    vec = v[:, 0]
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    vec = vec / math.sqrt(p.eval_I(vec))
    return float(w[0]), vec


def discrete_lambda1(n: int) -> float:
    """(4/h^2) sin^2(pi h / 2), the exact smallest eigenvalue of the finite-difference Laplacian."""
    h = 1.0 / (n + 1)
    return 4.0 / h**2 * math.sin(math.pi * h / 2.0) ** 2


def pohozaev_check_1d(p: DirichletProblem, u, alpha: float, beta: float, gamma: float, delta: float) -> float:
    """2 alpha I - 2 beta J - sigma gamma F - tau delta G (testing the equation with u)."""
    vals = p.values(u)
    return 2 * alpha * vals.i_s - 2 * beta * vals.j_s - p.sigma * gamma * vals.f - p.tau * delta * vals.g
