"""
sampling.py

Random initial states for multi-start descent and sign scans.
"""

import numpy as np

from nehari.core import ScaledProblem


def restart_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per restart, so results do not depend on scheduling."""
    return np.random.default_rng([int(seed), int(index)])


def random_bump_state(p: ScaledProblem, rng: np.random.Generator, max_bumps: int = 3) -> np.ndarray:
    """
    Sum of one to ``max_bumps`` Gaussian bumps with random centre, width and amplitude.

    Radial states get bumps around the origin on the scale of the grid's
    characteristic length; interval states are tapered by sin(pi x) so they
    vanish at both ends.
    """
    coords = p.coordinates
    n_bumps = int(rng.integers(1, max_bumps + 1))
    state = np.zeros_like(coords)
    if p.coordinate_name == "r":
        length = getattr(getattr(p, "grid", None), "r_char", 1.0)
        for _ in range(n_bumps):
            centre = rng.uniform(0.0, 4.0) * length
            width = rng.uniform(1.0, 6.0) * length
            state += rng.uniform(0.5, 1.5) * np.exp(-(((coords - centre) / width) ** 2))
    else:
        for _ in range(n_bumps):
            centre = rng.uniform(0.2, 0.8)
            width = rng.uniform(0.05, 0.3)
            state += rng.uniform(0.5, 1.5) * np.exp(-(((coords - centre) / width) ** 2))
        state *= np.sin(np.pi * coords)
    return state


def random_sphere_states(p: ScaledProblem, count: int, seed: int) -> list[np.ndarray]:
    """``count`` random states retracted onto M_s."""
    return [p.retract(random_bump_state(p, restart_rng(seed, k))) for k in range(count)]
