"""Search policies: Proposed (block Tsallis-Switch + CUSUM), Round-Robin, bandit mode.

Proposed runs Algorithm 1 with an infinite horizon and a finite threshold b:
each block picks a channel from the OMD distribution, runs a CUSUM phase on
it until the statistic leaves [0, b], pads the block with filler samples up
to B_n, and feeds the first B_n losses back as an importance-weighted cost.
The same loop with b = infinity and T blocks is the bandit algorithm whose
pseudo-regret ``run_bandit_mode`` measures.
"""
import logging
from typing import Optional, Sequence

import numpy as np

from anomaly_search.core_model import LossFn, llr, loss, mean_losses
from anomaly_search.environments import (
    ChannelChooser,
    GaussianChannels,
    ObservationSource,
    SamplingChooser,
)
from anomaly_search.models import (
    BanditOutcome,
    ChannelModel,
    Observation,
    PolicyState,
    SafetyCaps,
    SearchResult,
)
from anomaly_search.tsallis_omd import block_schedule, omd_weights, update_cumloss

logger = logging.getLogger(__name__)


def cusum_step(Y: float, increment: float) -> float:
    """Clamp the statistic at zero, then add the new log-likelihood ratio."""
    return max(Y, 0.0) + increment


def _draw(state: PolicyState, source: ObservationSource, channel: int) -> float:
    x = source.observe(channel)
    state.samples_taken += 1
    if state.trace is not None:
        state.trace.append(Observation(value=x, channel=channel, time_index=state.samples_taken))
    return x


def _result(
    model: ChannelModel,
    declared: int,
    tau: int,
    switches: int,
    lam: float,
    blocks: int,
    capped: bool,
    trace: Optional[list[Observation]] = None,
) -> SearchResult:
    return SearchResult(
        declared=declared,
        tau=tau,
        switches=switches,
        tau_tilde=tau + switches,
        tau_tilde_lambda=tau + lam * switches,
        correct=declared == model.anomalous_index,
        blocks=blocks,
        capped=capped,
        trace=trace,
    )


def run_proposed(
    model: ChannelModel,
    b: float,
    lam: float,
    rng: np.random.Generator,
    caps: Optional[SafetyCaps] = None,
    *,
    loss_fn: LossFn = loss,
    source: Optional[ObservationSource] = None,
    chooser: Optional[ChannelChooser] = None,
    record_trace: bool = False,
) -> SearchResult:
    """Run the Proposed search until the CUSUM statistic exceeds ``b``.

    Args:
        model: channel world; ``model.anomalous_index`` is i*.
        b: detection threshold, positive.
        lam: switching cost used by the block schedule and the tau + lambda*switches metric.
        rng: random stream for channel draws and observations.
        caps: safety limits; a run that hits them is returned with ``capped=True``.
        loss_fn: bounded loss in [0, 1] fed to the mirror-descent update.
        source: observation source; defaults to the Gaussian world of ``model``.
        chooser: channel sampler; defaults to drawing from the OMD distribution with ``rng``.
        record_trace: keep every observation on the result.

    Returns:
        The terminal ``SearchResult``; ``blocks`` is the block index after the
        terminating block has been booked.
    """
    if not b > 0:
        raise ValueError(f"threshold b must be positive, got {b}")
    caps = caps or SafetyCaps()
    source = source or GaussianChannels(model, rng)
    chooser = chooser or SamplingChooser(rng)
    state = PolicyState.initial(model.K, record_trace)
    declared: Optional[int] = None
    capped = False

    while declared is None and not capped:
        schedule = block_schedule(state.n, lam, model.K)
        p = omd_weights(state.C, schedule.eta_n)
        i = chooser.choose(p)
        if state.current_channel is not None and i != state.current_channel:
            state.switches += 1
        state.current_channel = i

        s = 0
        c = 0.0
        # CUSUM phase runs at least once per block so a negative carry-over clamps to 0
        while True:
            x = _draw(state, source, i)
            s += 1
            if s <= schedule.B_n:
                c += loss_fn(x)
            state.Y = cusum_step(state.Y, llr(x, model.mu))
            if state.Y > b:
                declared = i
                break
            if state.Y < 0:
                break
            if state.samples_taken >= caps.max_samples:
                capped = True
                break

        while declared is None and s < schedule.B_n:
            if state.samples_taken >= caps.max_samples:
                capped = True
                break
            x = _draw(state, source, i)
            s += 1
            c += loss_fn(x)

        state.C = update_cumloss(state.C, i, c, float(p[i - 1]))
        state.n += 1

    if capped:
        logger.debug("[proposed] capped after %d samples (b=%.4g)", state.samples_taken, b)
    return _result(
        model,
        declared if declared is not None else state.current_channel or 1,
        state.samples_taken,
        state.switches,
        lam,
        state.n,
        capped,
        state.trace,
    )


def run_round_robin(
    model: ChannelModel,
    b: float,
    rng: np.random.Generator,
    caps: Optional[SafetyCaps] = None,
    *,
    lam: float = 0.0,
    source: Optional[ObservationSource] = None,
    record_trace: bool = False,
) -> SearchResult:
    """Cycle through channels 1, 2, ..., K, moving on whenever the CUSUM drops below 0.

    ``lam`` only enters the tau + lambda*switches metric.
    """
    if not b > 0:
        raise ValueError(f"threshold b must be positive, got {b}")
    caps = caps or SafetyCaps()
    source = source or GaussianChannels(model, rng)
    state = PolicyState.initial(model.K, record_trace)
    i = 1
    capped = False

    while state.Y <= b:
        if state.samples_taken >= caps.max_samples:
            capped = True
            break
        if state.Y < 0:
            nxt = i % model.K + 1
            if nxt != i:
                state.switches += 1
            i = nxt
        x = _draw(state, source, i)
        state.Y = cusum_step(state.Y, llr(x, model.mu))

    if capped:
        logger.debug("[round_robin] capped after %d samples (b=%.4g)", state.samples_taken, b)
    return _result(model, i, state.samples_taken, state.switches, lam, 0, capped, state.trace)


def run_bandit_mode(
    model: ChannelModel,
    T: int,
    lam: float,
    rng: np.random.Generator,
    *,
    loss_fn: LossFn = loss,
    arm_means: Optional[Sequence[float]] = None,
    source: Optional[ObservationSource] = None,
    chooser: Optional[ChannelChooser] = None,
) -> BanditOutcome:
    """Play T blocks of the block-sampling bandit with the detection threshold disabled.

    With b infinite the CUSUM phase never ends on the anomalous arm, so it is
    skipped and every block takes exactly B_n samples. Pseudo-regret uses the
    known arm means (by default the Gaussian means of the 1 - Phi loss):
    sum over blocks of B_n * (mean(i_t) - best mean), plus lambda * switches.
    """
    if T < 1:
        raise ValueError(f"horizon T must be >= 1, got {T}")
    if arm_means is None:
        if loss_fn is not loss:
            raise ValueError("arm_means is required with a custom loss_fn")
        nominal, anomalous = mean_losses(model.mu)
        arm_means = [anomalous if i == model.anomalous_index else nominal for i in range(1, model.K + 1)]
    means = np.asarray(arm_means, dtype=float)
    if means.size != model.K:
        raise ValueError(f"arm_means needs {model.K} entries, got {means.size}")
    best = float(means.min())

    source = source or GaussianChannels(model, rng)
    chooser = chooser or SamplingChooser(rng)
    C = np.zeros(model.K)
    previous: Optional[int] = None
    switches = 0
    samples = 0
    gap_total = 0.0
    realized = 0.0

    for n in range(1, T + 1):
        schedule = block_schedule(n, lam, model.K)
        p = omd_weights(C, schedule.eta_n)
        i = chooser.choose(p)
        if previous is not None and i != previous:
            switches += 1
        previous = i
        c = 0.0
        for _ in range(schedule.B_n):
            c += loss_fn(source.observe(i))
        C = update_cumloss(C, i, c, float(p[i - 1]))
        samples += schedule.B_n
        realized += c
        gap_total += schedule.B_n * (means[i - 1] - best)

    return BanditOutcome(
        pseudo_regret=gap_total + lam * switches,
        realized_regret=realized - samples * best + lam * switches,
        switches=switches,
        samples=samples,
        blocks=T,
    )
