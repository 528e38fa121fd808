"""Bayesian quickest search over an infinite stream population with switching costs.

A stream is observed until its log-likelihood ratio Lambda either reaches
gamma_U (declare it a target) or drops below gamma_L (pay a switching cost
and move to a fresh stream). Thresholds are chosen by minimizing the
Brownian/Wald approximation C(delta_L, delta_U) of the expected
observations-plus-switching cost, with delta = exp(gamma):

    delta_U* = (1 - pi) / pi * (1 - eps) / eps           (closed form)
    delta_L* = argmin_{0 < d <= 1} C(d, delta_U*)        (strongly convex)
"""
import logging
import math
from fractions import Fraction
from typing import Iterable, Optional, Union

import numpy as np
from scipy import optimize

from anomaly_search.core_model import gaussian_kl
from anomaly_search.environments import GaussianStreams, StreamSource
from anomaly_search.models import (
    BayesConfig,
    BayesPrediction,
    BayesSearchResult,
    SafetyCaps,
    StreamPopulation,
    Thresholds,
)
from anomaly_search.tsallis_omd import SolverError

logger = logging.getLogger(__name__)

GSS_TOL = 1e-10
LAI_GAMMA_U = 6.130
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_EDGE = 1e-12
_MAX_GSS_ITERATIONS = 500

ArrayLike = Union[float, np.ndarray]


def cost_C(delta_L: ArrayLike, delta_U: float, cfg: BayesConfig) -> ArrayLike:
    """Approximate expected cost of thresholds (delta_L, delta_U).

    Sum of the expected observations on non-target streams, on target streams,
    and lambda_bar times the expected number of streams visited. Accepts an
    array of ``delta_L`` values.

    Raises:
        ValueError: ``delta_L`` outside (0, 1) or ``delta_U`` <= 1.
    """
    d_L = np.asarray(delta_L, dtype=float)
    if np.any(d_L <= 0) or np.any(d_L >= 1):
        raise ValueError(f"delta_L must lie strictly inside (0, 1), got {delta_L}")
    if not delta_U > 1:
        raise ValueError(f"delta_U must exceed 1, got {delta_U}")
    pi = cfg.pi_hat
    den = 1.0 + pi * (delta_U - 1.0)
    ratio = (delta_U - 1.0) / (1.0 - d_L)
    log_L = np.log(d_L)
    log_U = math.log(delta_U)

    nominal = (1.0 - pi) / (-cfg.D01) * (log_U + ratio * log_L) / den
    target = pi / cfg.D10 * (delta_U * log_U + d_L * ratio * log_L) / den
    switching = cfg.lambda_bar * ((delta_U - d_L) / (1.0 - d_L)) / den
    total = nominal + target + switching
    return float(total) if total.ndim == 0 else total


def cost_C_slope(delta_L: ArrayLike, delta_U: float, cfg: BayesConfig) -> ArrayLike:
    """Partial derivative dC/d(delta_L) at fixed ``delta_U``."""
    d_L = np.asarray(delta_L, dtype=float)
    if np.any(d_L <= 0) or np.any(d_L >= 1):
        raise ValueError(f"delta_L must lie strictly inside (0, 1), got {delta_L}")
    if not delta_U > 1:
        raise ValueError(f"delta_U must exceed 1, got {delta_U}")
    pi = cfg.pi_hat
    den = 1.0 + pi * (delta_U - 1.0)
    ratio = (delta_U - 1.0) / (1.0 - d_L)
    d_ratio = (delta_U - 1.0) / (1.0 - d_L) ** 2
    log_L = np.log(d_L)

    nominal = (1.0 - pi) / (-cfg.D01) * (d_ratio * log_L + ratio / d_L) / den
    target = pi / cfg.D10 * (ratio * log_L + d_L * d_ratio * log_L + ratio) / den
    switching = cfg.lambda_bar * d_ratio / den
    total = nominal + target + switching
    return float(total) if total.ndim == 0 else total


def delta_u_star(pi_hat: float, eps: float) -> float:
    """Closed-form optimal upper threshold ((1 - pi) / pi) * ((1 - eps) / eps)."""
    if not 0 < pi_hat < 1:
        raise ValueError(f"pi_hat must lie in (0, 1), got {pi_hat}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    # rational arithmetic on the shortest decimal form: (0.1, 0.01) gives 891 exactly
    pi, e = Fraction(repr(pi_hat)), Fraction(repr(eps))
    return float((1 - pi) / pi * (1 - e) / e)


def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(_MAX_GSS_ITERATIONS):
        if hi - lo <= tol:
            return 0.5 * (lo + hi)
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
    raise SolverError(f"golden-section search did not reach tol={tol} on [{lo}, {hi}]")


def _root_of_slope(slope, x: float, lo: float, hi: float) -> float:
    """Refine a golden-section estimate to the zero of the increasing ``slope``.

    Values alone pin a minimum only to about sqrt(machine eps); the slope
    root is resolved to full precision. Falls back to ``x`` when the slope
    does not change sign on (lo, hi).
    """
    width = 1e-4
    while True:
        a, b = max(lo, x - width), min(hi, x + width)
        s_a, s_b = slope(a), slope(b)
        if s_a == 0.0:
            return a
        if s_b == 0.0:
            return b
        if s_a < 0.0 < s_b:
            return float(optimize.brentq(slope, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
        if a == lo and b == hi:
            return x
        width *= 10.0


def delta_l_star(cfg: BayesConfig) -> float:
    """Minimizer of C(., delta_U*) over (0, 1].

    With lambda_bar = 0 the cost decreases all the way to the closed end, so
    the minimizer is exactly 1 (gamma_L = 0).
    """
    if cfg.lambda_bar == 0:
        return 1.0
    d_U = delta_u_star(cfg.pi_hat, cfg.eps)

    def f(d: float) -> float:
        return float(cost_C(d, d_U, cfg))

    def slope(d: float) -> float:
        return float(cost_C_slope(d, d_U, cfg))

    lo, hi = _EDGE, 1.0 - _EDGE
    x = _golden_section(f, lo, hi, GSS_TOL)
    return _root_of_slope(slope, x, lo, hi)


def wald_maps(thresholds: Thresholds) -> tuple[float, float]:
    """Approximate stage error rates (alpha, beta) from Wald's threshold relations."""
    d_L, d_U = thresholds.delta_L, thresholds.delta_U
    if not 0 < d_L < 1 < d_U:
        raise ValueError(f"need 0 < delta_L < 1 < delta_U, got ({d_L}, {d_U})")
    spread = d_U - d_L
    return (1.0 - d_L) / spread, d_L * (d_U - 1.0) / spread


def optimal_thresholds(cfg: BayesConfig) -> Thresholds:
    return Thresholds(delta_L=delta_l_star(cfg), delta_U=delta_u_star(cfg.pi_hat, cfg.eps))


def zero_lower_thresholds(gamma_u: float = LAI_GAMMA_U) -> Thresholds:
    """Thresholds of the comparison rule that leaves a stream as soon as Lambda < 0."""
    if not gamma_u >= 0:
        raise ValueError(f"gamma_u must be nonnegative, got {gamma_u}")
    return Thresholds(delta_L=1.0, delta_U=math.exp(gamma_u))


def lower_threshold_curve(cfg: BayesConfig, lambda_bars: Iterable[float]) -> list[tuple[float, float]]:
    """(lambda_bar, gamma_L*) pairs, holding the rest of ``cfg`` fixed."""
    curve = []
    for lam in lambda_bars:
        d_L = delta_l_star(cfg.model_copy(update={"lambda_bar": float(lam)}))
        curve.append((float(lam), math.log(d_L)))
    return curve


def strong_convexity_modulus(cfg: BayesConfig, delta_U: Optional[float] = None) -> float:
    """Lower bound on d^2 C / d delta_L^2 over (0, 1) at fixed ``delta_U``."""
    d_U = delta_u_star(cfg.pi_hat, cfg.eps) if delta_U is None else delta_U
    pi = cfg.pi_hat
    scale = (d_U - 1.0) / (1.0 + pi * (d_U - 1.0))
    return scale * ((2.0 / 3.0) * (1.0 - pi) / cfg.D01 + (1.0 / 3.0) * pi / cfg.D10 + cfg.lambda_bar)


def predicted_performance(cfg: BayesConfig, thresholds: Thresholds) -> BayesPrediction:
    """Wald-approximate stage rates, stage lengths and costs for ``thresholds``.

    Raises:
        ValueError: thresholds on the boundary (delta_L = 1 or delta_U = 1),
            where the approximation has no finite stage count.
    """
    alpha, beta = wald_maps(thresholds)
    pi = cfg.pi_hat
    g_L, g_U = thresholds.gamma_L, thresholds.gamma_U
    declare_rate = (1.0 - pi) * alpha + pi * (1.0 - beta)
    expected_streams = 1.0 / declare_rate
    stage_length = (
        (1.0 - pi) * (alpha * g_U + (1.0 - alpha) * g_L) / (-cfg.D01)
        + pi * ((1.0 - beta) * g_U + beta * g_L) / cfg.D10
    )
    expected_tau = expected_streams * stage_length
    switching = (expected_streams - 1.0) * cfg.lambda_bar
    return BayesPrediction(
        alpha=alpha,
        beta=beta,
        expected_streams=expected_streams,
        expected_stage_length=stage_length,
        expected_tau=expected_tau,
        expected_switching_cost=switching,
        combined_cost=expected_tau + switching,
        approx_cost=float(cost_C(thresholds.delta_L, thresholds.delta_U, cfg)),
        error_rate=(1.0 - pi) * alpha / declare_rate,
    )


def bayes_config_for(population: StreamPopulation) -> BayesConfig:
    """Build the threshold configuration of a Gaussian stream population."""
    f1 = (population.f1_mean, population.f1_sd)
    f0 = (population.f0_mean, population.f0_sd)
    return BayesConfig(
        pi_hat=population.pi_hat,
        eps=population.eps,
        lambda_bar=population.lambda_bar,
        D10=gaussian_kl(*f1, *f0),
        D01=gaussian_kl(*f0, *f1),
    )


def run_bayes_search(
    population: StreamPopulation,
    thresholds: Thresholds,
    rng: np.random.Generator,
    caps: Optional[SafetyCaps] = None,
    *,
    streams: Optional[StreamSource] = None,
) -> BayesSearchResult:
    """Search the stream population until some stream's Lambda reaches gamma_U.

    Args:
        population: prior, stream laws and switching-cost distribution.
        thresholds: (delta_L, delta_U); gamma_L = 0 leaves a stream on the first negative Lambda.
        rng: random stream for stream labels, observations and switching costs.
        caps: safety limits; a capped run reports ``capped=True``.
        streams: stream source; defaults to the Gaussian population of ``population``.

    Returns:
        Observations used, streams visited, summed switching cost and whether
        the declared stream is a target.
    """
    caps = caps or SafetyCaps()
    streams = streams or GaussianStreams(population, rng)
    g_L, g_U = thresholds.gamma_L, thresholds.gamma_U
    is_target = streams.new_stream()
    Lam = 0.0
    tau = 0
    visited = 1
    cost = 0.0

    while Lam < g_U:
        if tau >= caps.max_samples:
            logger.debug("[bayes] capped after %d samples, %d streams", tau, visited)
            return BayesSearchResult(
                tau=tau, streams_visited=visited, switching_cost=cost, declared_target=is_target, capped=True
            )
        if Lam < g_L:
            cost += streams.switch_cost()
            visited += 1
            is_target = streams.new_stream()
            Lam = 0.0
        Lam += streams.observe_llr(is_target)
        tau += 1

    return BayesSearchResult(tau=tau, streams_visited=visited, switching_cost=cost, declared_target=is_target)
