from collections.abc import Iterable

import numpy as np
import pytest


class ScriptedSource:
    """Observation source replaying a fixed sequence of llr steps."""

    def __init__(self, llr_steps: Iterable[float], mu: float):
        self._values = iter([step / (2.0 * mu) for step in llr_steps])
        self.calls: list[int] = []

    def observe(self, channel: int) -> float:
        self.calls.append(channel)
        return next(self._values)


class ScriptedChooser:
    """Channel chooser returning a fixed sequence of 1-based channels."""

    def __init__(self, channels: Iterable[int]):
        self._channels = iter(channels)

    def choose(self, p: np.ndarray) -> int:
        return next(self._channels)


class ScriptedStreams:
    """Stream source replaying fixed labels, llr steps and switching costs."""

    def __init__(self, labels: Iterable[bool], llr_steps: Iterable[float], costs: Iterable[float] = ()):
        self._labels = iter(labels)
        self._steps = iter(llr_steps)
        self._costs = iter(costs)

    def new_stream(self) -> bool:
        return next(self._labels)

    def observe_llr(self, is_target: bool) -> float:
        return next(self._steps)

    def switch_cost(self) -> float:
        return next(self._costs, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
