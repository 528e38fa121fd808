"""Shared records for channel worlds, search runs, bounds and experiments.

Every record is a pydantic model so configuration files, CLI arguments and
results share one validation path.
"""
import math
from enum import Enum
from typing import Literal, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

# Default for the false-alarm theorem's absolute constant: the two dominant
# explicit regret constants (66 and 32) pushed through the block-sum
# substitution, 66 * max(1, (3/2)^(1/3)) + 32.
DEFAULT_C_CONST = 66.0 * max(1.0, 1.5 ** (1.0 / 3.0)) + 32.0

PolicyName = Literal["proposed", "round_robin", "bayes", "bayes_lai"]


# --- Channel world ---------------------------------------------------------
class Placement(str, Enum):
    """How the anomalous channel is placed in each trial."""

    FIXED_LAST = "fixed_last"
    UNIFORM_RANDOM = "uniform_random"


class ChannelModel(BaseModel):
    """K Gaussian channels: nominal N(-mu, 1), anomalous N(mu, 1)."""

    model_config = ConfigDict(frozen=True)

    K: int = Field(ge=1)
    mu: float = Field(gt=0)
    anomalous_index: int = 0        # 1-based; filled with K when omitted
    placement: Placement = Placement.FIXED_LAST

    @model_validator(mode="before")
    @classmethod
    def _default_anomalous_index(cls, data):
        if isinstance(data, dict) and not data.get("anomalous_index") and "K" in data:
            data = {**data, "anomalous_index": data["K"]}
        return data

    @model_validator(mode="after")
    def _check_anomalous_index(self):
        if not 1 <= self.anomalous_index <= self.K:
            raise ValueError(
                f"anomalous_index must lie in [1, {self.K}], got {self.anomalous_index}"
            )
        return self

    def with_anomaly(self, index: int) -> "ChannelModel":
        """Return a copy whose anomalous channel is ``index``."""
        return ChannelModel(K=self.K, mu=self.mu, anomalous_index=index, placement=self.placement)


class Observation(BaseModel):
    value: float
    channel: int = Field(ge=1)
    time_index: int = Field(ge=1)


# --- Block schedule and run state -----------------------------------------
class BlockSchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    a_n: float = Field(ge=0)
    B_n: int = Field(ge=1)
    eta_n: float = Field(gt=0)


class PolicyState(BaseModel):
    """Mutable state of one running Proposed search.

    Algorithm 1 advances its block index and its round counter together, so a
    single counter ``n`` carries both.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    Y: float = 0.0
    C: np.ndarray
    n: int = 1
    current_channel: Optional[int] = None
    samples_taken: int = 0
    switches: int = 0
    trace: Optional[list[Observation]] = None

    @classmethod
    def initial(cls, K: int, record_trace: bool = False) -> "PolicyState":
        return cls(C=np.zeros(K), trace=[] if record_trace else None)


class SafetyCaps(BaseModel):
    """Limits that keep an infinite-horizon run from looping forever."""

    max_samples: int = Field(default=10_000_000, ge=1)


class SearchResult(BaseModel):
    """Terminal record of one search run."""

    declared: int = Field(ge=1)
    tau: int = Field(ge=0)
    switches: int = Field(ge=0)
    tau_tilde: int = Field(ge=0)
    tau_tilde_lambda: float = Field(ge=0)
    correct: bool
    blocks: int = Field(ge=0)
    capped: bool = False
    trace: Optional[list[Observation]] = None

    @model_validator(mode="after")
    def _check_delay_accounting(self):
        if self.tau_tilde != self.tau + self.switches:
            raise ValueError("tau_tilde must equal tau + switches")
        return self


class BanditOutcome(BaseModel):
    """Finite-horizon run of the block-sampling bandit (threshold disabled)."""

    pseudo_regret: float
    realized_regret: float
    switches: int
    samples: int
    blocks: int


# --- Bounds ----------------------------------------------------------------
class BoundParams(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    K: int = Field(ge=2)
    lam: float = Field(ge=0, alias="lambda")
    Delta: float = Field(gt=0)
    b: float = Field(gt=0)
    C_const: float = Field(default=DEFAULT_C_CONST, gt=0)
    series_tol: float = Field(default=1e-12, gt=0, lt=1)
    n_max: int = Field(default=100_000, ge=1)


class StageErrorRates(BaseModel):
    """Monte Carlo error rates of one SPRT stage with thresholds 0 and b."""

    alpha: float
    beta: float
    alpha_se: float
    beta_se: float
    alpha_ci: tuple[float, float]
    beta_ci: tuple[float, float]
    trials: int


class FalseAlarmBound(BaseModel):
    value: float = Field(ge=0, le=1)
    terms: int
    remainder: float
    C_const: float


# --- Bayesian baseline -------------------------------------------------------
class BayesConfig(BaseModel):
    pi_hat: float = Field(gt=0, lt=1)
    eps: float = Field(gt=0, lt=1)
    lambda_bar: float = Field(default=0.0, ge=0)
    D10: float = Field(gt=0)
    D01: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_tolerance(self):
        if self.eps >= 1 - self.pi_hat:
            raise ValueError(
                f"eps={self.eps} must be below 1 - pi_hat={1 - self.pi_hat}; "
                "otherwise no observation is worth taking"
            )
        return self


class Thresholds(BaseModel):
    model_config = ConfigDict(frozen=True)

    delta_L: float = Field(gt=0, le=1)
    delta_U: float = Field(ge=1)

    @classmethod
    def from_gammas(cls, gamma_L: float, gamma_U: float) -> "Thresholds":
        return cls(delta_L=math.exp(gamma_L), delta_U=math.exp(gamma_U))

    @computed_field  # type: ignore[prop-decorator]
    @property
    def gamma_L(self) -> float:
        return math.log(self.delta_L)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def gamma_U(self) -> float:
        return math.log(self.delta_U)


class StreamPopulation(BaseModel):
    """Infinite population of Gaussian data streams with random switching costs.

    ``f1_scale``/``f0_scale`` are variances when ``scale_is_variance`` is set
    and standard deviations otherwise. Switching costs are Gamma(shape, 1).
    """

    model_config = ConfigDict(extra="forbid")

    pi_hat: float = Field(default=0.1, ge=0, le=1)
    eps: float = Field(default=0.01, gt=0, lt=1)
    f1_mean: float = 0.0
    f1_scale: float = Field(default=1.0, gt=0)
    f0_mean: float = 0.0
    f0_scale: float = Field(default=1.5, gt=0)
    scale_is_variance: bool = True
    switch_cost_shape: float = Field(default=1.0, ge=0)

    @property
    def f1_sd(self) -> float:
        return math.sqrt(self.f1_scale) if self.scale_is_variance else self.f1_scale

    @property
    def f0_sd(self) -> float:
        return math.sqrt(self.f0_scale) if self.scale_is_variance else self.f0_scale

    @property
    def lambda_bar(self) -> float:
        return self.switch_cost_shape


class BayesSearchResult(BaseModel):
    tau: int = Field(ge=0)
    streams_visited: int = Field(ge=1)
    switching_cost: float = Field(ge=0)
    declared_target: bool
    capped: bool = False

    @property
    def switches(self) -> int:
        return self.streams_visited - 1


# --- Experiments -------------------------------------------------------------
class ExperimentSpec(BaseModel):
    """One Monte Carlo experiment: policies x threshold grid x trials."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    name: str
    K: int = Field(ge=1)
    mu: float = Field(gt=0)
    lam: float = Field(default=0.0, ge=0, alias="lambda")
    policies: list[PolicyName]
    b_grid: list[float]
    trials: int = Field(default=10_000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    sample_cap: int = Field(default=10_000_000, ge=1)
    placement: Placement = Placement.FIXED_LAST
    population: Optional[StreamPopulation] = None

    @field_validator("policies")
    @classmethod
    def _check_policies(cls, policies: list[str]) -> list[str]:
        if not policies:
            raise ValueError("policies must not be empty")
        if len(set(policies)) != len(policies):
            raise ValueError(f"duplicate policies in {policies}")
        return policies

    @field_validator("b_grid")
    @classmethod
    def _check_b_grid(cls, b_grid: list[float]) -> list[float]:
        if not b_grid:
            raise ValueError("b_grid must not be empty")
        if any(b <= 0 for b in b_grid):
            raise ValueError("b_grid values must be positive")
        if any(hi <= lo for lo, hi in zip(b_grid, b_grid[1:])):
            raise ValueError("b_grid must be strictly increasing")
        return b_grid

    @model_validator(mode="after")
    def _check_population(self):
        if {"bayes", "bayes_lai"} & set(self.policies):
            if self.population is None:
                raise ValueError("bayes policies need a 'population' section")
            if not 0 < self.population.pi_hat < 1:
                raise ValueError(f"bayes policies need 0 < pi_hat < 1, got {self.population.pi_hat}")
        return self

    def channel_model(self) -> ChannelModel:
        return ChannelModel(K=self.K, mu=self.mu, placement=self.placement)


class SummaryRow(BaseModel):
    """Aggregated statistics for one (policy, b) cell; capped trials excluded."""

    policy: str
    b: float
    trials: int
    p_fa: float
    p_fa_lo: float
    p_fa_hi: float
    mean_tau: float
    mean_switches: float
    mean_tau_tilde: float
    mean_tau_lambda: float
    se_tau: float
    capped_count: int = 0

    @property
    def p_fa_ci(self) -> tuple[float, float]:
        return self.p_fa_lo, self.p_fa_hi


class BayesPrediction(BaseModel):
    """Wald/Brownian-approximation predictions for given thresholds."""

    alpha: float
    beta: float
    expected_streams: float
    expected_stage_length: float
    expected_tau: float
    expected_switching_cost: float
    combined_cost: float
    approx_cost: float
    error_rate: float
