"""Block schedule and the 1/2-Tsallis mirror-descent step of the block bandit.

The simplex argmin has the closed form p_i = (eta * (C_i + nu) + 2)^-2 for a
scalar dual variable nu, found by a bracketed Newton iteration on
g(nu) = sum_i p_i(nu) - 1.
"""
import math

import numpy as np

from anomaly_search.models import BlockSchedule

NEWTON_TOL = 1e-12
MAX_ITERATIONS = 200


class SolverError(RuntimeError):
    """A numerical solver failed to converge within its iteration cap."""


def block_schedule(n: int, lam: float, K: int) -> BlockSchedule:
    """Compute a_n, B_n and eta_n for block ``n``."""
    if n < 1 or K < 1 or lam < 0:
        raise ValueError(f"need n >= 1, K >= 1, lambda >= 0; got n={n}, K={K}, lambda={lam}")
    a_n = 1.5 * lam * math.sqrt(n / K)
    B_n = max(math.ceil(a_n), 1)
    eta_n = 2.0 / (a_n + 1.0) * math.sqrt(2.0 / n)
    return BlockSchedule(n=n, a_n=a_n, B_n=B_n, eta_n=eta_n)


def omd_objective(p: np.ndarray, C: np.ndarray, eta: float) -> float:
    """Linearized loss minus the scaled 1/2-Tsallis entropy."""
    return float(np.dot(p, C) - np.sum(2.0 * np.sqrt(p) - 2.0 * p) / eta)


def omd_weights(C: np.ndarray, eta: float) -> np.ndarray:
    """Return the sampling distribution minimizing the OMD objective on the simplex.

    Args:
        C: cumulative importance-weighted losses, one per channel.
        eta: learning rate, positive.

    Returns:
        Strictly positive probability vector of the same length as ``C``.

    Raises:
        ValueError: ``eta`` not positive or ``C`` not finite.
        SolverError: no convergence within the iteration cap.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    losses = np.asarray(C, dtype=float)
    if not np.all(np.isfinite(losses)):
        raise ValueError("cumulative losses must be finite")
    K = losses.size
    # shift invariance: solve on C - min(C) so (eta*C)^2 never overflows
    shifted = losses - losses.min()

    lo = -1.0 / eta                         # g(lo) >= 0
    hi = (math.sqrt(K) - 2.0) / eta         # g(hi) <= 0
    nu = lo
    for _ in range(MAX_ITERATIONS):
        base = eta * (shifted + nu) + 2.0
        p = base**-2
        g = p.sum() - 1.0
        if abs(g) < NEWTON_TOL:
            return p / p.sum()
        if g > 0:
            lo = nu
        else:
            hi = nu
        slope = -2.0 * eta * np.sum(base**-3)
        step = nu - g / slope
        nu = step if lo < step < hi else 0.5 * (lo + hi)
    raise SolverError(f"OMD normalization did not converge in {MAX_ITERATIONS} iterations")


def update_cumloss(C: np.ndarray, i: int, c: float, p_i: float) -> np.ndarray:
    """Add the importance-weighted block loss c / p_i to channel ``i`` (1-based)."""
    if not p_i > 0:
        raise ValueError(f"p_i must be positive, got {p_i}")
    if c < 0:
        raise ValueError(f"block loss must be nonnegative, got {c}")
    updated = np.array(C, dtype=float, copy=True)
    updated[i - 1] += c / p_i
    return updated


def psi(m: int, lam: float, K: int) -> int:
    """Total samples in blocks 1..m, i.e. sum of B_j."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    j = np.arange(1, m + 1)
    a = 1.5 * lam * np.sqrt(j / K)
    return int(np.maximum(np.ceil(a), 1).sum())
