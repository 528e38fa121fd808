"""Channel distributions, log-likelihood ratio and the bounded loss.

Nominal channels emit N(-mu, 1) and the anomalous channel emits N(mu, 1).
All sampling of the Gaussian channel world flows through this module.
"""
import math
from typing import Callable

import numpy as np
from scipy import special

from anomaly_search.models import ChannelModel, Observation, Placement

LossFn = Callable[[float], float]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def std_normal_cdf(x: float) -> float:
    """Standard normal c.d.f. Phi(x), accurate to double precision."""
    return float(special.ndtr(x))


def loss(x: float) -> float:
    """Default loss 1 - Phi(x): nominal (negative-mean) samples cost more."""
    return float(special.ndtr(-x))


def gaussian_logpdf(x: float, mean: float, sd: float) -> float:
    z = (x - mean) / sd
    return -0.5 * z * z - math.log(sd) - _LOG_SQRT_2PI


def llr(x: float, mu: float) -> float:
    """Return log f1(x)/f0(x) for f1 = N(mu, 1), f0 = N(-mu, 1); equals 2*mu*x."""
    return 2.0 * mu * x


def gaussian_llr(x: float, mean1: float, sd1: float, mean0: float, sd0: float) -> float:
    """Return log f1(x)/f0(x) for two arbitrary Gaussians."""
    return gaussian_logpdf(x, mean1, sd1) - gaussian_logpdf(x, mean0, sd0)


def gaussian_kl(mean_p: float, sd_p: float, mean_q: float, sd_q: float) -> float:
    """Return D(p || q) for p = N(mean_p, sd_p^2), q = N(mean_q, sd_q^2)."""
    ratio = (sd_p / sd_q) ** 2
    return 0.5 * (ratio + (mean_p - mean_q) ** 2 / sd_q**2 - 1.0 - math.log(ratio))


def mean_losses(mu: float) -> tuple[float, float]:
    """Expected default loss on a (nominal, anomalous) channel.

    For X ~ N(m, 1), E[1 - Phi(X)] = Phi(-m / sqrt(2)).
    """
    shift = mu / math.sqrt(2.0)
    return std_normal_cdf(shift), std_normal_cdf(-shift)


def loss_gap(mu: float) -> float:
    """Gap Delta between nominal and anomalous expected loss, 2*Phi(mu/sqrt 2) - 1."""
    if not mu > 0:
        raise ValueError(f"mu must be positive for a positive loss gap, got {mu}")
    # erf form keeps precision as mu -> 0
    return float(special.erf(mu / 2.0))


def channel_mean(model: ChannelModel, channel: int) -> float:
    if not 1 <= channel <= model.K:
        raise ValueError(f"channel must lie in [1, {model.K}], got {channel}")
    return model.mu if channel == model.anomalous_index else -model.mu


def sample_channel(
    model: ChannelModel,
    channel: int,
    rng: np.random.Generator,
    time_index: int = 1,
) -> Observation:
    """Draw one observation from ``channel``; deterministic given the rng state.

    Single-draw form of ``environments.GaussianChannels``, which buffers its normals.
    """
    mean = channel_mean(model, channel)
    return Observation(value=mean + float(rng.standard_normal()), channel=channel, time_index=time_index)


def place_anomaly(model: ChannelModel, rng: np.random.Generator) -> ChannelModel:
    """Resolve the anomalous index for one trial according to ``model.placement``."""
    if model.placement is Placement.UNIFORM_RANDOM:
        return model.with_anomaly(int(rng.integers(1, model.K + 1)))
    return model
