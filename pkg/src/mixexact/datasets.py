"""Seeded synthetic count datasets shaped like the study scenarios."""

from __future__ import annotations

import numpy as np


def poisson_sample(n: int, rate: float, seed: int) -> list[int]:
    """n Poisson(rate) draws from a fixed seed."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if rate <= 0:
        raise ValueError(f"need a positive rate, got {rate}")
    rng = np.random.default_rng(seed)
    return [int(x) for x in rng.poisson(rate, n)]


def poisson_mixture_sample(
    n: int, weight: float, rate1: float, rate2: float, seed: int
) -> list[int]:
    """n draws from weight * Poisson(rate1) + (1 - weight) * Poisson(rate2)."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not (0.0 <= weight <= 1.0):
        raise ValueError(f"mixture weight must be in [0, 1], got {weight}")
    if rate1 <= 0 or rate2 <= 0:
        raise ValueError(f"need positive rates, got {rate1}, {rate2}")
    rng = np.random.default_rng(seed)
    first = rng.random(n) < weight
    rates = np.where(first, rate1, rate2)
    return [int(x) for x in rng.poisson(rates)]
