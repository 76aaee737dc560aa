"""
stats.py

Summary statistics for multi-start solver runs.
"""

import statistics


def calculate_stats(values: list[float]) -> dict:
    """
    Summarise the final values of independent restarts.

    Returns:
        dict: {
            "mean": float,
            "std": float,
            "min": float,
            "max": float,
            "spread": float   # (max - min) / max(|min|, 1e-300)
        }
    """
    if not values:
        return {"mean": 0.0, "std": 0.0, "min": 0.0, "max": 0.0, "spread": 0.0}

    lo, hi = min(values), max(values)
    return {
        "mean": statistics.mean(values),
        "std": statistics.pstdev(values),
        "min": lo,
        "max": hi,
        "spread": (hi - lo) / max(abs(lo), 1e-300),
    }


def agreeing_fraction(values: list[float], best: float, rtol: float = 1e-6) -> float:
    """Fraction of restarts that landed within rtol of the best value."""
    if not values:
        return 0.0
    hits = sum(1 for v in values if abs(v - best) <= rtol * max(abs(best), 1.0))
    return hits / len(values)
