import math

import numpy as np
import pytest

import nehari.core as core
from nehari.dirichlet import DirichletProblem, IntervalGrid, discrete_lambda1, pohozaev_check_1d, rayleigh_lambda1
from nehari.errors import ConfigError, GridMismatch
from nehari.sampling import random_bump_state, restart_rng


def test_grid_size_floor():
    with pytest.raises(ConfigError, match="n >= 63"):
        IntervalGrid(31)
    grid = IntervalGrid(63)
    assert grid.h == 1.0 / 64
    assert math.isclose(grid.nodes[-1], 1.0 - grid.h)


def test_parameter_windows():
    with pytest.raises(ConfigError, match=r"\(1, 2\)"):
        DirichletProblem(n=63, sigma=2.5)
    with pytest.raises(ConfigError, match="tau"):
        DirichletProblem(n=63, tau=7.0)
    with pytest.raises(ConfigError, match="mu\\*nu"):
        DirichletProblem(n=63, mu=1.0, nu=1.0)
    assert DirichletProblem(n=63, tau=7.0, tau_cap=8.0).tau == 7.0


def test_case_from_coefficients():
    assert DirichletProblem(n=63, mu=0.0, nu=0.0).case is None
    assert DirichletProblem(n=63, mu=-2.0, nu=0.0).case is core.SignCase.II
    assert DirichletProblem(n=63, mu=1.0, nu=-1.0).case is core.SignCase.V


def test_sine_values_are_exact():
    p = DirichletProblem(n=127, mu=0.0)
    h = p.grid.h
    u = np.sin(np.pi * p.coordinates)
    assert math.isclose(p.eval_I_1d(u), math.sin(math.pi * h / 2) ** 2 / h**2, rel_tol=1e-12)
    assert math.isclose(p.eval_J_1d(u), 0.25, rel_tol=1e-12)
    assert math.isclose(core.psi_tilde(p, u), discrete_lambda1(127), rel_tol=1e-12)
    assert p.eval_F_1d(u) == 0.0 and p.eval_G_1d(u) == 0.0


def test_eigensolve_oracle():
    p = DirichletProblem(n=511, mu=0.0)
    lam, vec = rayleigh_lambda1(p)
    assert math.isclose(lam, discrete_lambda1(511), rel_tol=1e-10)
    assert math.isclose(lam, math.pi**2, rel_tol=1e-3)
    assert math.isclose(p.eval_I(vec), 1.0, rel_tol=1e-12)
    shape = np.sin(np.pi * p.coordinates)
    np.testing.assert_allclose(vec / np.max(vec), shape / np.max(shape), atol=1e-8)


def test_scaling_laws_exact():
    p = DirichletProblem(n=63, sigma=1.5, tau=4.0, mu=1.0, nu=-1.0)
    e = p.exponents
    for k in range(20):
        u = random_bump_state(p, restart_rng(42, k))
        base = p.values(u)
        for t in (0.25, 0.5, 2.0, 4.0):
            vals = p.values(p.scale(u, t))
            assert math.isclose(vals.i_s, t**e.s * base.i_s, rel_tol=1e-12)
            assert math.isclose(vals.j_s, t**e.s * base.j_s, rel_tol=1e-12)
            assert math.isclose(vals.f, t**e.q * base.f, rel_tol=1e-12)
            assert math.isclose(vals.g, t**e.r * base.g, rel_tol=1e-12)


def test_scaling_action_axioms():
    p = DirichletProblem(n=63)
    u = random_bump_state(p, restart_rng(1, 0))
    np.testing.assert_array_equal(p.scale(u, 1.0), u)
    np.testing.assert_array_equal(p.scale(u, 0.0), np.zeros_like(u))
    np.testing.assert_allclose(p.scale(p.scale(u, 2.0), 3.0), p.scale(u, 6.0), rtol=1e-14)
    with pytest.raises(ValueError):
        p.scale(u, -1.0)


def test_gradients_match_finite_differences():
    p = DirichletProblem(n=63, mu=1.0, nu=-1.0)
    x = p.coordinates
    u = np.sin(np.pi * x) * (1.0 + 0.3 * x)
    d = np.sin(2 * np.pi * x)
    eps = 1e-6
    for ev, gr in ((p.eval_I, p.grad_I), (p.eval_J, p.grad_J), (p.eval_F, p.grad_F), (p.eval_G, p.grad_G)):
        fd = (ev(u + eps * d) - ev(u - eps * d)) / (2 * eps)
        assert math.isclose(float(gr(u) @ d), fd, rel_tol=1e-6, abs_tol=1e-10)


def test_metric_and_riesz_are_inverse():
    p = DirichletProblem(n=63)
    v = random_bump_state(p, restart_rng(5, 5))
    np.testing.assert_allclose(p.riesz(p.metric_apply(v)), v, rtol=1e-10, atol=1e-13)
    assert math.isclose(p.inner(v, v), 2.0 * p.eval_I(v), rel_tol=1e-12)


def test_state_shape_checked():
    p = DirichletProblem(n=63)
    with pytest.raises(GridMismatch):
        p.eval_I(np.ones(64))


def test_pohozaev_check_matches_core():
    p = DirichletProblem(n=63, mu=1.0, nu=-0.5)
    u = random_bump_state(p, restart_rng(3, 0))
    one_d = pohozaev_check_1d(p, u, 1.0, 4.0, 1.0, 1.0)
    assert math.isclose(one_d, core.pohozaev_residual(p, u, 1.0, 4.0, 1.0, 1.0), rel_tol=1e-12, abs_tol=1e-14)


def test_term_classification():
    p = DirichletProblem(n=63, mu=1.0, nu=-1.0)
    e = p.exponents
    assert core.classify_term(e, e.q) == "subscaled"
    assert core.classify_term(e, e.r) == "superscaled"
