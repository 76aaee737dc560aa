import math

import numpy as np
import pytest

import nehari.core as core
import nehari.optimizer as opt
from nehari.errors import CaseMismatch, ConfigError, ZeroState
from nehari.sampling import random_bump_state, restart_rng
from nehari.sps import (
    RadialGrid,
    SpsNonlinearity,
    SpsProblem,
    coulomb_energy,
    coulomb_energy_direct,
    dirichlet_energy,
    newton_potential,
    norm_E,
    norm_scaling_bound,
    pohozaev_check_sps,
    sps_h_pairing,
)

GRID = RadialGrid(n=512)


def gaussian(grid):
    return np.exp(-grid.nodes**2)


def test_grid_validation():
    with pytest.raises(ConfigError, match="n >= 64"):
        RadialGrid(n=32)
    with pytest.raises(ConfigError, match="r_min"):
        RadialGrid(n=128, r_min=0.1)
    with pytest.raises(ConfigError, match="r_max"):
        RadialGrid(n=128, r_max=20.0)


def test_weights_cover_the_ball():
    total = 4.0 * math.pi * GRID.r_max**3 / 3.0
    assert math.isclose(GRID.weights.sum(), total, rel_tol=1e-12)
    assert np.all(GRID.weights > 0)


def test_gaussian_integrals():
    u = gaussian(GRID)
    assert math.isclose(dirichlet_energy(GRID, u), 3.0 * math.sqrt(2.0) * math.pi**1.5 / 4.0, rel_tol=2e-3)
    assert math.isclose(coulomb_energy(GRID, u), math.pi**2.5 / 4.0, rel_tol=2e-3)
    assert math.isclose(float(GRID.weights @ u**2), (math.pi / 2.0) ** 1.5, rel_tol=1e-3)


def test_quadrature_is_second_order():
    def errors(n):
        grid = RadialGrid(n=n)
        u = gaussian(grid)
        return np.array([
            abs(dirichlet_energy(grid, u) - 3.0 * math.sqrt(2.0) * math.pi**1.5 / 4.0),
            abs(coulomb_energy(grid, u) - math.pi**2.5 / 4.0),
            abs(float(grid.weights @ np.abs(u) ** 3) - (math.pi / 3.0) ** 1.5),
        ])

    coarse, mid, fine = errors(128), errors(256), errors(512)
    assert np.all(np.log2(coarse / mid) >= 1.9)
    assert np.all(np.log2(mid / fine) >= 1.9)


def test_coulomb_prefix_sums_match_double_sum():
    u = random_bump_state(SpsProblem(GRID), restart_rng(0, 0))
    assert math.isclose(coulomb_energy(GRID, u), coulomb_energy_direct(GRID, u), rel_tol=1e-12)


def test_newton_potential_far_field():
    u = gaussian(GRID)
    phi = newton_potential(GRID, u)
    mass = float(GRID.weights @ u**2)
    assert math.isclose(phi[-1], mass / GRID.r_max, rel_tol=1e-12)
    assert np.all(np.diff(phi) <= 0)


def test_nonlinearity_windows():
    with pytest.raises(ConfigError, match="18/7, 3"):
        SpsNonlinearity(sigma=4.0, sign_sigma=1)
    with pytest.raises(ConfigError, match=r"\(3, 6\)"):
        SpsNonlinearity(tau=7.0, sign_sigma=0, sign_tau=1)
    with pytest.raises(ConfigError, match="six admissible"):
        SpsNonlinearity(sign_sigma=1, sign_tau=1)
    with pytest.raises(ConfigError, match="sign_tau"):
        SpsNonlinearity(sign_tau=2)
    # an absent term does not constrain its exponent
    assert SpsNonlinearity(sigma=2.5, sign_sigma=0, sign_tau=1).case is core.SignCase.III


def test_exponents_from_powers():
    p = SpsProblem(GRID, SpsNonlinearity(sigma=2.7, tau=4.0, sign_sigma=1, sign_tau=-1))
    assert p.exponents.s == 3.0
    assert math.isclose(p.exponents.q, 2.4)
    assert math.isclose(p.exponents.r, 5.0)
    assert p.case is core.SignCase.V


def test_scaling_laws_within_interpolation_error():
    p = SpsProblem(GRID, SpsNonlinearity(sigma=2.7, tau=4.0, sign_sigma=1, sign_tau=-1))
    e = p.exponents
    for k in range(20):
        u = random_bump_state(p, restart_rng(17, k))
        base = p.values(u)
        for t in (0.25, 0.5, 2.0, 4.0):
            vals = p.values(p.scale(u, t))
            assert math.isclose(vals.i_s, t**e.s * base.i_s, rel_tol=1e-5)
            assert math.isclose(vals.j_s, t**e.s * base.j_s, rel_tol=1e-5)
            assert math.isclose(vals.f, t**e.q * base.f, rel_tol=1e-5)
            assert math.isclose(vals.g, t**e.r * base.g, rel_tol=1e-5)


def test_scaling_action_axioms():
    p = SpsProblem(GRID)
    u = random_bump_state(p, restart_rng(2, 0))
    np.testing.assert_array_equal(p.scale(u, 1.0), u)
    np.testing.assert_array_equal(p.scale(u, 0.0), np.zeros_like(u))
    composed = p.scale(p.scale(u, 2.0), 1.5)
    np.testing.assert_allclose(composed, p.scale(u, 3.0), atol=1e-5 * np.max(np.abs(composed)))
    # linear in u
    w = random_bump_state(p, restart_rng(2, 1))
    np.testing.assert_allclose(p.scale(u + 2.0 * w, 0.7), p.scale(u, 0.7) + 2.0 * p.scale(w, 0.7), atol=1e-13)


def test_gradients_match_finite_differences():
    p = SpsProblem(RadialGrid(n=128), SpsNonlinearity(sigma=2.7, tau=4.0, sign_sigma=1, sign_tau=-1))
    u = random_bump_state(p, restart_rng(4, 0))
    d = random_bump_state(p, restart_rng(4, 1))
    eps = 1e-6
    for ev, gr in ((p.eval_I, p.grad_I), (p.eval_J, p.grad_J), (p.eval_F, p.grad_F), (p.eval_G, p.grad_G)):
        fd = (ev(u + eps * d) - ev(u - eps * d)) / (2 * eps)
        assert math.isclose(float(gr(u) @ d), fd, rel_tol=1e-6)


def test_amplitude_retraction_lands_on_sphere():
    p = SpsProblem(GRID)
    u = 5.0 * random_bump_state(p, restart_rng(8, 0))
    assert math.isclose(p.eval_I(p.retract(u)), 1.0, rel_tol=1e-12)
    with pytest.raises(ZeroState):
        p.retract(np.zeros(GRID.n))


def test_metric_and_riesz_are_inverse():
    p = SpsProblem(RadialGrid(n=128))
    v = random_bump_state(p, restart_rng(1, 3))
    np.testing.assert_allclose(p.riesz(p.metric_apply(v)), v, rtol=1e-6, atol=1e-8)


def test_pohozaev_combination_is_scaled_identity():
    p = SpsProblem(GRID, SpsNonlinearity(sigma=2.8, tau=4.5, sign_sigma=-1, sign_tau=1))
    rng = np.random.default_rng(21)
    for k in range(10):
        u = random_bump_state(p, restart_rng(21, k))
        alpha, beta, gamma, delta = rng.uniform(0.5, 2.0, size=4)
        euler, pohozaev = pohozaev_check_sps(p, u, alpha, beta, gamma, delta)
        combined = 3.0 * (2.0 / 3.0 * euler - 1.0 / 3.0 * pohozaev)
        scaled = core.pohozaev_residual(p, u, alpha, beta, gamma, delta)
        vals = p.values(u)
        size = 3 * alpha * vals.i_s + 3 * beta * vals.j_s + abs(vals.f) * p.exponents.q + abs(vals.g) * p.exponents.r
        assert abs(combined - scaled) <= 1e-10 * size


def test_h_pairing_matches_core():
    p = SpsProblem(GRID, SpsNonlinearity(sigma=2.7, tau=4.0, sign_sigma=1, sign_tau=-1))
    u = random_bump_state(p, restart_rng(6, 0))
    assert math.isclose(sps_h_pairing(p, u), core.h_pairing(p, u), rel_tol=1e-12)
    assert sps_h_pairing(p, u) > 0


def test_energy_norm_scaling_bound():
    p = SpsProblem(GRID)
    for k in range(5):
        u = random_bump_state(p, restart_rng(9, k))
        for t in (0.25, 0.5, 2.0, 4.0):
            assert norm_E(p, p.scale(u, t)) <= norm_scaling_bound(p, u, t) * (1 + 1e-5)


def test_fiber_requires_matching_signs():
    p = SpsProblem(RadialGrid(n=128))
    u = p.retract(random_bump_state(p, restart_rng(0, 0)))
    with pytest.raises(CaseMismatch):
        core.solve_fiber_time(p, u, 1.0)
    fiber = core.solve_fiber_time(p, u, -1.0)
    assert fiber.t > 0 and fiber.method == "closed-form"


def test_converged_solution_satisfies_both_identities():
    p = SpsProblem(RadialGrid(n=256), SpsNonlinearity(sigma=2.7, sign_sigma=1))
    rep = opt.minimize_lambda_tilde(p, -1.0, opt.SolverConfig(restarts=2))
    v = rep.nehari_state
    euler, pohozaev = pohozaev_check_sps(p, v, 1.0, rep.value, 1.0, 1.0)
    size = dirichlet_energy(p.grid, v) + rep.value * float(p.grid.weights @ np.abs(v) ** 3)
    assert abs(euler) <= 1e-6 * size
    assert abs(pohozaev) <= 1e-6 * size
