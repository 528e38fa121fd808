"""Seeded Monte Carlo runner: policies x threshold grid x trials -> summary rows.

Every trial owns a generator seeded from (spec.seed, policy, b index, trial
index), so a row depends only on its coordinates and never on how trials are
scheduled across worker processes.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import NamedTuple, Optional, Sequence

import numpy as np

from anomaly_search.bayes_baseline import (
    bayes_config_for,
    delta_l_star,
    run_bayes_search,
)
from anomaly_search.core_model import place_anomaly
from anomaly_search.detectors import run_proposed, run_round_robin
from anomaly_search.models import (
    ExperimentSpec,
    SafetyCaps,
    StreamPopulation,
    SummaryRow,
    Thresholds,
)
from anomaly_search.settings import load_settings
from anomaly_search.stats import trial_rng, wilson_interval

logger = logging.getLogger(__name__)

BAYES_POLICIES = ("bayes", "bayes_lai")

# Threshold grids for the presets. The grids are our choice: each spans
# false-alarm rates from roughly 0.3 down to below 0.01 for its setting.
_PRESETS: dict[str, dict] = {
    "hard": {
        "name": "hard",
        "K": 22,
        "mu": 0.1,
        "lambda": 1.0,
        "policies": ["proposed", "round_robin"],
        "b_grid": [4.0, 6.0, 8.0, 10.0, 12.0],
    },
    "easy": {
        "name": "easy",
        "K": 8,
        "mu": 0.4,
        "lambda": 0.025,
        "policies": ["proposed", "round_robin"],
        "b_grid": [2.0, 3.5, 5.0, 6.5, 8.0],
    },
    # Stream-population setting; K and mu are unused by the bayes rows and
    # b is read as gamma_U (ln 891 is the optimal upper threshold here).
    "companion": {
        "name": "companion",
        "K": 1,
        "mu": 1.0,
        "lambda": 0.0,
        "policies": ["bayes", "bayes_lai"],
        "b_grid": [5.0, 6.130, math.log(891.0), 8.0],
        "population": {"pi_hat": 0.1, "eps": 0.01, "f0_scale": 1.5, "switch_cost_shape": 1.0},
    },
}


class TrialOutcome(NamedTuple):
    correct: bool
    tau: int
    switches: int
    tau_lambda: float
    capped: bool


def preset(name: str) -> ExperimentSpec:
    """Return one of the built-in experiments: ``hard``, ``easy`` or ``companion``."""
    try:
        return ExperimentSpec.model_validate(_PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}") from None


def _bayes_thresholds(policy: str, population: StreamPopulation, b: float) -> Thresholds:
    if policy == "bayes_lai":
        return Thresholds.from_gammas(0.0, b)
    return Thresholds(delta_L=delta_l_star(bayes_config_for(population)), delta_U=math.exp(b))


def run_trial(
    spec: ExperimentSpec,
    policy: str,
    b_index: int,
    trial: int,
    thresholds: Optional[Thresholds] = None,
) -> TrialOutcome:
    """Run a single seeded trial of ``policy`` at ``spec.b_grid[b_index]``."""
    b = spec.b_grid[b_index]
    rng = trial_rng(spec.seed, policy, b_index, trial)
    caps = SafetyCaps(max_samples=spec.sample_cap)

    if policy in BAYES_POLICIES:
        assert spec.population is not None
        thresholds = thresholds or _bayes_thresholds(policy, spec.population, b)
        found = run_bayes_search(spec.population, thresholds, rng, caps)
        return TrialOutcome(
            found.declared_target, found.tau, found.switches, found.tau + found.switching_cost, found.capped
        )

    model = place_anomaly(spec.channel_model(), rng)
    if policy == "proposed":
        result = run_proposed(model, b, spec.lam, rng, caps)
    elif policy == "round_robin":
        result = run_round_robin(model, b, rng, caps, lam=spec.lam)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    return TrialOutcome(result.correct, result.tau, result.switches, result.tau_tilde_lambda, result.capped)


def _run_cell(spec: ExperimentSpec, policy: str, b_index: int) -> list[TrialOutcome]:
    thresholds = None
    if policy in BAYES_POLICIES:
        assert spec.population is not None
        thresholds = _bayes_thresholds(policy, spec.population, spec.b_grid[b_index])
    return [run_trial(spec, policy, b_index, t, thresholds) for t in range(spec.trials)]


def _run_cell_args(args: tuple[ExperimentSpec, str, int]) -> list[TrialOutcome]:
    return _run_cell(*args)


def aggregate(policy: str, b: float, outcomes: Sequence[TrialOutcome]) -> SummaryRow:
    """Summarize one (policy, b) cell; capped trials are counted but left out of every statistic."""
    kept = [o for o in outcomes if not o.capped]
    n = len(kept)
    capped = len(outcomes) - n
    if n == 0:
        nan = math.nan
        return SummaryRow(
            policy=policy, b=b, trials=len(outcomes), p_fa=nan, p_fa_lo=nan, p_fa_hi=nan,
            mean_tau=nan, mean_switches=nan, mean_tau_tilde=nan, mean_tau_lambda=nan,
            se_tau=nan, capped_count=capped,
        )
    errors = sum(not o.correct for o in kept)
    tau = np.array([o.tau for o in kept], dtype=float)
    switches = np.array([o.switches for o in kept], dtype=float)
    tau_lambda = np.array([o.tau_lambda for o in kept], dtype=float)
    lo, hi = wilson_interval(errors, n)
    return SummaryRow(
        policy=policy,
        b=b,
        trials=len(outcomes),
        p_fa=errors / n,
        p_fa_lo=lo,
        p_fa_hi=hi,
        mean_tau=float(tau.mean()),
        mean_switches=float(switches.mean()),
        mean_tau_tilde=float((tau + switches).mean()),
        mean_tau_lambda=float(tau_lambda.mean()),
        se_tau=float(tau.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
        capped_count=capped,
    )


def run_experiment(spec: ExperimentSpec, workers: Optional[int] = None) -> list[SummaryRow]:
    """Run every (policy, b) cell of ``spec`` and return rows sorted by (policy, b).

    Args:
        spec: validated experiment description.
        workers: worker processes; defaults to the ``threads`` setting. 1 runs in-process.

    Returns:
        One ``SummaryRow`` per (policy, b) pair.
    """
    workers = workers or load_settings()["threads"]
    cells = [(policy, i) for policy in spec.policies for i in range(len(spec.b_grid))]
    logger.info("[harness] %s: %d cells x %d trials on %d worker(s)", spec.name, len(cells), spec.trials, workers)

    tasks = [(spec, policy, i) for policy, i in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_args, tasks))
    else:
        results = [_run_cell_args(task) for task in tasks]

    rows = []
    for (policy, i), outcomes in zip(cells, results):
        row = aggregate(policy, spec.b_grid[i], outcomes)
        logger.info("[harness] policy=%s b=%.4g trials=%d p_fa=%.4f mean_tau_tilde=%.2f",
                    policy, row.b, row.trials, row.p_fa, row.mean_tau_tilde)
        if row.capped_count:
            logger.warning("[harness] policy=%s b=%.4g: %d trial(s) hit the sample cap",
                           policy, row.b, row.capped_count)
        rows.append(row)
    return sorted(rows, key=lambda r: (r.policy, r.b))


def delay_curve(rows: Sequence[SummaryRow], policy: str) -> tuple[np.ndarray, np.ndarray]:
    """Monotone (P_FA, mean tau~) curve of ``policy`` along its b sweep.

    P_FA is forced nonincreasing and delay nondecreasing in b, then both are
    returned in increasing P_FA order for interpolation.
    """
    mine = sorted((r for r in rows if r.policy == policy and not math.isnan(r.p_fa)), key=lambda r: r.b)
    if not mine:
        raise ValueError(f"no rows for policy {policy!r}")
    p_fa = np.minimum.accumulate(np.array([r.p_fa for r in mine]))
    delay = np.maximum.accumulate(np.array([r.mean_tau_tilde for r in mine]))
    return p_fa[::-1], delay[::-1]


def false_alarm_at_delay(rows: Sequence[SummaryRow], policy: str, delay: float) -> float:
    """P_FA of ``policy`` interpolated at mean tau~ = ``delay``; nan outside its range."""
    p_fa, delays = delay_curve(rows, policy)
    p_fa, delays = p_fa[::-1], delays[::-1]
    if not delays[0] <= delay <= delays[-1]:
        return math.nan
    return float(np.interp(delay, delays, p_fa))


def matched_savings(
    rows: Sequence[SummaryRow],
    baseline: str,
    candidate: str,
    p_fa_points: Sequence[float],
) -> list[float]:
    """Relative delay saving 1 - tau~_candidate / tau~_baseline at matched P_FA.

    Both curves are interpolated piecewise-linearly in P_FA; points outside
    either curve's range give nan.
    """
    base_x, base_y = delay_curve(rows, baseline)
    cand_x, cand_y = delay_curve(rows, candidate)
    savings = []
    for p in p_fa_points:
        if not (base_x[0] <= p <= base_x[-1] and cand_x[0] <= p <= cand_x[-1]):
            savings.append(math.nan)
            continue
        base = float(np.interp(p, base_x, base_y))
        cand = float(np.interp(p, cand_x, cand_y))
        savings.append(1.0 - cand / base)
    return savings
