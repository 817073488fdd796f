"""Small statistics helpers for empirical rates and game outcomes."""

from __future__ import annotations

import math

Z95 = 1.959963984540054  # two-sided 95% normal quantile


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = phat + z * z / (2 * trials)
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return ((centre - half) / denom, (centre + half) / denom)


def binomial_acceptance(trials: int, p: float, z: float = Z95) -> tuple[int, int]:
    """Count interval containing ~95% of Binomial(trials, p) mass.

    Normal approximation with continuity correction; accurate for the
    large-trials regimes used here (trials * p well above 100).
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    mean = trials * p
    sd = math.sqrt(trials * p * (1 - p))
    lo = math.floor(mean - z * sd - 0.5)
    hi = math.ceil(mean + z * sd + 0.5)
    return (max(0, lo), min(trials, hi))


def advantage(wins: int, trials: int) -> float:
    """Distinguishing advantage of a guessing adversary: |2 * winrate - 1|."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    return abs(2.0 * wins / trials - 1.0)
