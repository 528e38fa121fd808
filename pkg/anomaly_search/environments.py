"""Observation sources and channel choosers consumed by the detectors.

Detectors only talk to these small interfaces, so the seeded Gaussian worlds
below and scripted test doubles are interchangeable. ``GaussianChannels``
draws the same law as ``core_model.sample_channel`` (channel mean plus a
standard normal), but pulls the normals from the generator in chunks and
returns bare floats; ``sample_channel`` is the single-draw form.
"""
from typing import Protocol

import numpy as np

from anomaly_search.core_model import channel_mean, gaussian_llr
from anomaly_search.models import ChannelModel, StreamPopulation

_BUFFER = 512


class ObservationSource(Protocol):
    def observe(self, channel: int) -> float: ...


class ChannelChooser(Protocol):
    def choose(self, p: np.ndarray) -> int: ...


class StreamSource(Protocol):
    def new_stream(self) -> bool: ...

    def observe_llr(self, is_target: bool) -> float: ...

    def switch_cost(self) -> float: ...


class _NormalBuffer:
    """Standard normal draws fetched from the generator in fixed-size chunks."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._values = np.empty(0)
        self._pos = 0

    def next(self) -> float:
        if self._pos == self._values.size:
            self._values = self._rng.standard_normal(_BUFFER)
            self._pos = 0
        z = self._values[self._pos]
        self._pos += 1
        return float(z)


class GaussianChannels:
    """The K-channel Gaussian world of one trial."""

    def __init__(self, model: ChannelModel, rng: np.random.Generator):
        self.model = model
        self._means = [channel_mean(model, i) for i in range(1, model.K + 1)]
        self._normals = _NormalBuffer(rng)

    def observe(self, channel: int) -> float:
        return self._means[channel - 1] + self._normals.next()


class SamplingChooser:
    """Draw a 1-based channel index from a probability vector."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng

    def choose(self, p: np.ndarray) -> int:
        cdf = np.cumsum(p)
        idx = int(np.searchsorted(cdf, self._rng.random() * cdf[-1], side="right"))
        return min(idx, p.size - 1) + 1


class GaussianStreams:
    """Infinite stream population: each new stream is a target w.p. pi_hat."""

    def __init__(self, population: StreamPopulation, rng: np.random.Generator):
        self.population = population
        self._rng = rng
        self._normals = _NormalBuffer(rng)
        self._f1 = (population.f1_mean, population.f1_sd)
        self._f0 = (population.f0_mean, population.f0_sd)

    def new_stream(self) -> bool:
        return bool(self._rng.random() < self.population.pi_hat)

    def observe_llr(self, is_target: bool) -> float:
        mean, sd = self._f1 if is_target else self._f0
        x = mean + sd * self._normals.next()
        return gaussian_llr(x, *self._f1, *self._f0)

    def switch_cost(self) -> float:
        shape = self.population.switch_cost_shape
        return float(self._rng.gamma(shape, 1.0)) if shape > 0 else 0.0
