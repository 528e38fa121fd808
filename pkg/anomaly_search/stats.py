"""Seed derivation and binomial summary helpers shared by the Monte Carlo code."""
import hashlib
import math

import numpy as np

WILSON_Z = 1.959963984540054  # two-sided 95%


def derive_seed(*parts: object) -> int:
    """Derive a 64-bit seed from its coordinates, e.g. (seed, policy, b_index, trial).

    Counter-based: the seed of a trial depends only on its coordinates, never on
    how many other trials ran before it.
    """
    payload = "::".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


def trial_rng(*parts: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))


def wilson_interval(successes: int, n: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion; (nan, nan) when n == 0."""
    if n == 0:
        return math.nan, math.nan
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


def proportion_se(successes: int, n: int) -> float:
    if n == 0:
        return math.nan
    p = successes / n
    return math.sqrt(p * (1 - p) / n)
