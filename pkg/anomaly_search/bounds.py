"""Regret and false-alarm bounds, the phi(n) fixed-point solver, SPRT stage rates.

The false-alarm bound is

    P_FA <= 1 - (1 - beta) * sum_{n>=1} beta^(n-1) (1 - alpha)^min{(K-1)n, phi(n)}

where phi(n) solves phi = A (lambda sqrt(K (phi + n)) + log(phi + n)) with
A = C (K - 1) / Delta^2.
"""
import logging
import math

import numpy as np
from scipy import optimize

from anomaly_search.core_model import llr
from anomaly_search.models import BoundParams, FalseAlarmBound, StageErrorRates
from anomaly_search.stats import derive_seed, proportion_se, wilson_interval
from anomaly_search.tsallis_omd import SolverError

logger = logging.getLogger(__name__)

PHI_RTOL = 1e-9
_MAX_DOUBLINGS = 400
_STAGE_CHUNK = 64


def regret_bound_explicit(T: float, lam: float, K: int, Delta: float) -> float:
    """Explicit upper bound on the pseudo-regret R(T, lambda) of the block bandit."""
    if not Delta > 0:
        raise ValueError(f"Delta must be positive, got {Delta}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    spread = (K - 1) / Delta
    cube_T = T ** (1.0 / 3.0)
    first = (66.0 * (lam * K) ** (2.0 / 3.0) * cube_T + 32.0 * math.log(T)) * spread
    second = (160.0 * lam ** (2.0 / 3.0) * cube_T * K ** (1.0 / 6.0) + 160.0 * lam + 49.0 * lam**2 + 32.0) * spread
    return first + second + 544.0 * lam / math.sqrt(K) + lam + 66.0


# --- phi(n) -----------------------------------------------------------------
def _phi_scale(params: BoundParams) -> float:
    return params.C_const * (params.K - 1) / params.Delta**2


def phi_residual(x: float, n: int, params: BoundParams) -> float:
    """h(x) = x - A (lambda sqrt(K (x + n)) + log(x + n)); phi(n) is its largest root."""
    A = _phi_scale(params)
    return x - A * (params.lam * math.sqrt(params.K * (x + n)) + math.log(x + n))


def _phi_slope(x: float, n: int, params: BoundParams) -> float:
    A = _phi_scale(params)
    return 1.0 - A * (params.lam * math.sqrt(params.K) / (2.0 * math.sqrt(x + n)) + 1.0 / (x + n))


def solve_phi(n: int, params: BoundParams) -> float:
    """Solve the functional equation for phi(n).

    h is convex with h(0) <= 0, so the largest root is bracketed by the
    minimizer of h (or 0 when h is already increasing there) and a doubled
    upper end where h turns positive.

    Raises:
        SolverError: no sign change before the bracket cap.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")

    def h(x: float) -> float:
        return phi_residual(x, n, params)

    def slope(x: float) -> float:
        return _phi_slope(x, n, params)

    hi = max(1.0, -2.0 * h(0.0))
    for _ in range(_MAX_DOUBLINGS):
        if h(hi) > 0 and slope(hi) > 0:
            break
        hi *= 2.0
    else:
        raise SolverError(f"phi({n}) has no root below {hi:.3g}; Delta too small?")

    lo = 0.0
    if slope(0.0) < 0:
        lo = optimize.brentq(slope, 0.0, hi, xtol=1e-12, maxiter=500)
    if h(lo) >= 0:
        return lo
    x = optimize.brentq(h, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=500)
    # Newton polish, accepted only while the residual keeps shrinking
    for _ in range(3):
        r = h(x)
        if r == 0.0:
            break
        x_new = x - r / slope(x)
        if abs(h(x_new)) >= abs(r):
            break
        x = x_new
    if abs(h(x)) > PHI_RTOL * max(1.0, x):
        raise SolverError(f"phi({n}) residual {h(x):.3g} above tolerance")
    return x


def _min_exponent(n: int, params: BoundParams) -> float:
    cap = float((params.K - 1) * n)
    # {h <= 0} is an interval starting at 0, so h(cap) <= 0 means cap <= phi(n)
    if phi_residual(cap, n, params) <= 0:
        return cap
    return solve_phi(n, params)


def false_alarm_bound(alpha: float, beta: float, params: BoundParams) -> FalseAlarmBound:
    """Evaluate the false-alarm upper bound from stage-wise SPRT error rates.

    The series stops when a term drops below ``params.series_tol`` or after
    ``params.n_max`` terms. Exponents never decrease in n, so the dropped tail
    is at most beta * term_N / (1 - beta); (1 - beta) times that is added to
    the reported value.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0 <= beta < 1:
        raise ValueError(f"beta must lie in [0, 1), the series diverges otherwise; got {beta}")
    log_keep = math.log1p(-alpha)
    total = 0.0
    term = 1.0
    n = 0
    for n in range(1, params.n_max + 1):
        term = beta ** (n - 1) * math.exp(_min_exponent(n, params) * log_keep)
        total += term
        if term < params.series_tol:
            break
    remainder = beta * term
    value = 1.0 - (1.0 - beta) * total + remainder
    return FalseAlarmBound(
        value=min(1.0, max(0.0, value)),
        terms=n,
        remainder=remainder,
        C_const=params.C_const,
    )


# --- SPRT stage error rates --------------------------------------------------
def _stage_declares_anomalous(mean: float, mu: float, b: float, rng: np.random.Generator) -> bool:
    Y = 0.0
    while True:
        steps = llr(mean + rng.standard_normal(_STAGE_CHUNK), mu)
        walk = Y + np.cumsum(steps)
        exits = np.flatnonzero((walk > b) | (walk < 0))
        if exits.size:
            return bool(walk[exits[0]] > b)
        Y = float(walk[-1])


def sprt_error_rates(b: float, mu: float, trials: int, rng: np.random.Generator) -> StageErrorRates:
    """Monte Carlo error rates of one SPRT stage started at 0 with thresholds 0 and b.

    alpha is the frequency of crossing b under the nominal law N(-mu, 1), beta
    the frequency of dropping below 0 under the anomalous law N(mu, 1). Each
    trial owns a generator derived from one base seed drawn from ``rng``, so
    the estimate does not depend on trial order.
    """
    if not b > 0 or not mu > 0:
        raise ValueError(f"b and mu must be positive, got b={b}, mu={mu}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    base = int(rng.integers(0, 2**63))
    false_pos = 0
    false_neg = 0
    for t in range(trials):
        nominal_rng = np.random.default_rng(derive_seed(base, "sprt", "f0", t))
        anomalous_rng = np.random.default_rng(derive_seed(base, "sprt", "f1", t))
        false_pos += _stage_declares_anomalous(-mu, mu, b, nominal_rng)
        false_neg += not _stage_declares_anomalous(mu, mu, b, anomalous_rng)
    logger.debug("[bounds] sprt b=%.4g mu=%.4g: %d/%d false positives, %d/%d false negatives",
                 b, mu, false_pos, trials, false_neg, trials)
    return StageErrorRates(
        alpha=false_pos / trials,
        beta=false_neg / trials,
        alpha_se=proportion_se(false_pos, trials),
        beta_se=proportion_se(false_neg, trials),
        alpha_ci=wilson_interval(false_pos, trials),
        beta_ci=wilson_interval(false_neg, trials),
        trials=trials,
    )
