"""Closed-loop synthetic environments and the experiment runner driving the full platform."""

import heapq
import itertools
import logging
import math
import tempfile
import time
from pathlib import Path
from typing import (
    Annotated,
    Any,
    ClassVar,
    Dict,
    List,
    Literal,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import orjson
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, TypeAdapter, model_validator
from scipy.special import expit
from scipy.stats import norm

from eazybandit.core import (
    Algorithm,
    BanditConfig,
    CategoricalFeature,
    HyperParams,
    NumericFeature,
    RewardKind,
    context_dimension,
    encode_context,
    enumerate_arms,
)
from eazybandit.exceptions import EnvironmentMismatch, InvalidConfig, NotFrozen, SimulationFailed
from eazybandit.journal import JSON_OPTIONS
from eazybandit.pipeline import FlushPolicy
from eazybandit.policies.structured import GGIWeights, ggi_scalarize
from eazybandit.service import Platform
from eazybandit.settings import SamplerSettings

logger = logging.getLogger(__name__)

#: Event-time seconds between two simulated decisions.
STEP_SECONDS = 1.0

#: Upper edges, in milliseconds, of the decision latency histogram buckets.
LATENCY_BUCKETS_MS = (0.1, 0.5, 1.0, 5.0, 10.0, 50.0, math.inf)


# ------------------------------------------
# Delay models
# ------------------------------------------


class FixedDelay(BaseModel):
    """Every reward arrives ``steps`` steps after its decision."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["Fixed"] = "Fixed"
    steps: int = Field(0, ge=0)

    def draw(self, rng: np.random.Generator) -> int:
        """Delay of one reward in steps."""
        return self.steps


class GeometricDelay(BaseModel):
    """Rewards arrive after a geometric number of steps with mean ``1 / p``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["Geometric"] = "Geometric"
    p: float = Field(..., gt=0.0, le=1.0)

    def draw(self, rng: np.random.Generator) -> int:
        """Delay of one reward in steps."""
        return int(rng.geometric(self.p))


DelayModel = Annotated[Union[FixedDelay, GeometricDelay], Field(discriminator="kind")]


# ------------------------------------------
# Environments
# ------------------------------------------


class Outcome(NamedTuple):
    """The reward event an environment emits for one decision."""

    values: List[float]
    click_position: Optional[int] = None


class _Environment(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    reward_kind: ClassVar[RewardKind] = RewardKind.BINARY

    arm_ids: Optional[List[str]] = None
    delay: DelayModel = Field(default_factory=FixedDelay)

    @property
    def num_arms(self) -> int:  # pragma: no cover
        raise NotImplementedError

    def arms(self) -> List[str]:
        """Arm ids in the order the environment indexes them."""
        return list(self.arm_ids) if self.arm_ids else [f"a{i}" for i in range(self.num_arms)]

    def context_schema(self) -> List[Any]:
        """Context features the environment draws."""
        return []

    def draw_context(self, rng: np.random.Generator) -> Dict[str, Any]:
        """Raw context of one decision."""
        return {}

    def expected(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover
        """Expected reward of every arm in encoded context ``x``."""
        raise NotImplementedError

    def respond(
        self, arms: Sequence[int], x: np.ndarray, rng: np.random.Generator
    ) -> Optional[Outcome]:  # pragma: no cover
        """Draw the reward of a decision; ``None`` when no event is emitted."""
        raise NotImplementedError

    @model_validator(mode="after")
    def _check_arm_ids(self) -> "_Environment":
        if self.arm_ids is not None and len(self.arm_ids) != self.num_arms:
            raise ValueError(f"{len(self.arm_ids)} arm ids given for {self.num_arms} arms")
        return self


def _probabilities(values: Sequence[float], name: str) -> None:
    if not values:
        raise ValueError(f"{name} must not be empty")
    if any(not 0.0 <= v <= 1.0 for v in values):
        raise ValueError(f"{name} must lie in [0, 1]")


class BernoulliArms(_Environment):
    """Context-free arms paying 1 with fixed probabilities."""

    kind: Literal["BernoulliArms"] = "BernoulliArms"
    means: List[float]

    @model_validator(mode="after")
    def _check_means(self) -> "BernoulliArms":
        _probabilities(self.means, "means")
        return self

    @property
    def num_arms(self) -> int:  # noqa: D102
        return len(self.means)

    def expected(self, x: np.ndarray) -> np.ndarray:  # noqa: D102
        return np.asarray(self.means, dtype=np.float64)

    def respond(  # noqa: D102
        self, arms: Sequence[int], x: np.ndarray, rng: np.random.Generator
    ) -> Optional[Outcome]:
        return Outcome([1.0]) if rng.random() < self.means[arms[0]] else None


class _Segmented(_Environment):
    """Environments drawing a categorical segment and uniform numeric features per step."""

    segments: int = Field(1, ge=1)
    numerics: int = Field(0, ge=0)

    _w: Optional[np.ndarray] = PrivateAttr(None)

    @property
    def matrix(self) -> np.ndarray:
        """The weights as an array, built on first use."""
        if self._w is None:
            self._w = np.asarray(getattr(self, "weights"), dtype=np.float64)
        return self._w

    def context_schema(self) -> List[Any]:  # noqa: D102
        schema: List[Any] = []
        if self.segments > 1:
            schema.append(CategoricalFeature(name="segment", cardinality=self.segments))
        schema.extend(NumericFeature(name=f"x{j}", lo=0.0, hi=1.0) for j in range(self.numerics))
        return schema

    def draw_context(self, rng: np.random.Generator) -> Dict[str, Any]:  # noqa: D102
        raw: Dict[str, Any] = {}
        if self.segments > 1:
            raw["segment"] = int(rng.integers(self.segments))
        for j in range(self.numerics):
            raw[f"x{j}"] = float(rng.random())
        return raw


class _Contextual(_Segmented):
    weights: List[List[float]] = Field(..., description="Arm x context.")

    @model_validator(mode="after")
    def _check_weights(self) -> "_Contextual":
        dim = context_dimension(self.context_schema())
        if any(len(row) != dim for row in self.weights):
            raise ValueError(f"Every weight row needs {dim} entries")
        return self

    @property
    def num_arms(self) -> int:  # noqa: D102
        return len(self.weights)

    def scores(self, x: np.ndarray) -> np.ndarray:
        """Linear scores of every arm."""
        return self.matrix @ x


class LinearContext(_Contextual):
    """Continuous rewards: a linear function of the context plus Gaussian noise."""

    reward_kind: ClassVar[RewardKind] = RewardKind.CONTINUOUS

    kind: Literal["LinearContext"] = "LinearContext"
    noise: float = Field(0.1, ge=0.0)

    def expected(self, x: np.ndarray) -> np.ndarray:  # noqa: D102
        return self.scores(x)

    def respond(  # noqa: D102
        self, arms: Sequence[int], x: np.ndarray, rng: np.random.Generator
    ) -> Optional[Outcome]:
        return Outcome([float(self.scores(x)[arms[0]] + self.noise * rng.standard_normal())])


class LogisticContext(_Contextual):
    """Binary rewards with a logistic link on a linear function of the context."""

    kind: Literal["LogisticContext"] = "LogisticContext"

    def expected(self, x: np.ndarray) -> np.ndarray:  # noqa: D102
        return expit(self.scores(x))

    def respond(  # noqa: D102
        self, arms: Sequence[int], x: np.ndarray, rng: np.random.Generator
    ) -> Optional[Outcome]:
        return Outcome([1.0]) if rng.random() < self.expected(x)[arms[0]] else None

    @classmethod
    def random(
        cls, arms: int, segments: int, rng: np.random.Generator, scale: float = 2.0, **kwargs: Any
    ) -> "LogisticContext":
        """
        An instance whose best arm differs by segment.

        Each arm gets a shared offset drawn around -1 and an independent
        per-segment effect of standard deviation ``scale``.
        """
        dim = 1 + (segments if segments > 1 else 0)
        weights = np.zeros((arms, dim))
        weights[:, 0] = rng.normal(-1.0, 0.25, size=arms)
        weights[:, 1:] = rng.normal(0.0, scale, size=(arms, dim - 1))
        return cls(weights=weights.tolist(), segments=segments, **kwargs)


class CascadeClicks(_Environment):
    """
    A user scanning a ranking top-down and clicking the first attractive item.

    Items are attractive independently with their own probability.
    """

    kind: Literal["CascadeClicks"] = "CascadeClicks"
    attraction: List[float]
    k: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_attraction(self) -> "CascadeClicks":
        _probabilities(self.attraction, "attraction")
        if self.k > len(self.attraction):
            raise ValueError(f"k={self.k} exceeds {len(self.attraction)} items")
        return self

    @property
    def num_arms(self) -> int:  # noqa: D102
        return len(self.attraction)

    def expected(self, x: np.ndarray) -> np.ndarray:  # noqa: D102
        return np.asarray(self.attraction, dtype=np.float64)

    def respond(  # noqa: D102
        self, arms: Sequence[int], x: np.ndarray, rng: np.random.Generator
    ) -> Optional[Outcome]:
        for position, item in enumerate(arms):
            if rng.random() < self.attraction[item]:
                return Outcome([1.0], position)
        return None


class MultiObjectiveLinear(_Segmented):
    """Reward vectors: one linear model per objective plus Gaussian noise."""

    reward_kind: ClassVar[RewardKind] = RewardKind.MULTI_OBJECTIVE

    kind: Literal["MultiObjectiveLinear"] = "MultiObjectiveLinear"
    weights: List[List[List[float]]] = Field(..., description="Objective x arm x context.")
    noise: float = Field(0.1, ge=0.0)

    @model_validator(mode="after")
    def _check_shape(self) -> "MultiObjectiveLinear":
        dim = context_dimension(self.context_schema())
        arms = {len(objective) for objective in self.weights}
        if not self.weights or len(arms) != 1:
            raise ValueError("Every objective needs weights for the same arms")
        if any(len(row) != dim for objective in self.weights for row in objective):
            raise ValueError(f"Every weight row needs {dim} entries")
        return self

    @property
    def num_arms(self) -> int:  # noqa: D102
        return len(self.weights[0]) if self.weights else 0

    @property
    def num_objectives(self) -> int:
        """Length of the reward vectors."""
        return len(self.weights)

    def expected(self, x: np.ndarray) -> np.ndarray:  # noqa: D102
        return (self.matrix @ x).T

    def respond(  # noqa: D102
        self, arms: Sequence[int], x: np.ndarray, rng: np.random.Generator
    ) -> Optional[Outcome]:
        mean = self.matrix[:, arms[0], :] @ x
        return Outcome((mean + self.noise * rng.standard_normal(mean.shape)).tolist())


Environment = Annotated[
    Union[BernoulliArms, LinearContext, LogisticContext, CascadeClicks, MultiObjectiveLinear],
    Field(discriminator="kind"),
]

_ENVIRONMENT = TypeAdapter(Environment)


def load_environment(payload: Mapping[str, Any]) -> Environment:
    """Parse an environment from its JSON payload."""
    return _ENVIRONMENT.validate_python(payload)


def check_environment(config: BanditConfig, env: Environment) -> None:
    """
    Check that an environment can drive a bandit.

    Raises:
        EnvironmentMismatch: If arms, context schema, reward kind or ranking size differ.
    """
    problems = []
    if enumerate_arms(config.arm_space) != env.arms():
        problems.append("arm ids differ from the environment's")
    if list(config.context_schema) != env.context_schema():
        problems.append("context schema differs from the environment's")
    if config.reward_spec.kind is not env.reward_kind:
        problems.append(
            f"reward kind {config.reward_spec.kind.value} but the environment "
            f"emits {env.reward_kind.value}"
        )
    is_cascade = isinstance(env, CascadeClicks)
    if is_cascade != config.algorithm.is_ranking:
        problems.append("rankings need both a ranking algorithm and a cascade environment")
    elif is_cascade and config.hyperparameters.ranking_k != env.k:
        problems.append(f"ranking_k is {config.hyperparameters.ranking_k}, environment k {env.k}")
    if (
        isinstance(env, MultiObjectiveLinear)
        and config.reward_spec.num_objectives != env.num_objectives
    ):
        problems.append(f"{config.reward_spec.num_objectives} objectives configured")
    if problems:
        raise EnvironmentMismatch(f"{config.bandit_id}: " + "; ".join(problems))


# ------------------------------------------
# Runs
# ------------------------------------------


class PipelineParams(BaseModel):
    """
    Pydantic model for everything but the bandit that shapes a simulated run.

    Args:
        flush_policy (FlushPolicy): Batching bounds of the reward pipeline.
        refresh_period (float): Event-time seconds between sampler refreshes.
        curve_points (int): Number of windows the report's curves are cut into.
        convergence_threshold (float): Oracle-hit fraction every later window must reach.
        measure_latency (bool): Whether to record a decision latency histogram.
        fail_on_poison (bool): Whether poisoned examples fail the run.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    flush_policy: FlushPolicy = Field(default_factory=FlushPolicy)
    refresh_period: float = Field(10.0, gt=0.0)
    curve_points: int = Field(100, ge=1)
    convergence_threshold: float = Field(0.9, gt=0.0, le=1.0)
    measure_latency: bool = False
    fail_on_poison: bool = True


class RunReport(BaseModel):
    """
    What a simulated run measured.

    Curves hold one point per window of the run: ``cumulative_regret`` at the
    window's last step, ``oracle_fraction`` and ``pull_fractions`` over the
    window's decisions. ``best_arm_fraction`` is the oracle-hit fraction over
    the final tenth of the run.
    """

    bandit_id: str
    algorithm: Algorithm
    seed: int
    horizon: int
    steps: List[int]
    cumulative_regret: List[float]
    oracle_fraction: List[float]
    pull_fractions: List[Dict[str, float]]
    final_regret: float
    best_arm_fraction: float
    convergence_step: Optional[int]
    counters: Dict[str, int]
    final_version: int
    train_seq: int
    latency_ms: Optional[Dict[str, int]] = None


class ABReport(BaseModel):
    """A frozen bandit measured against a control experience."""

    bandit_id: str
    control: Union[str, List[str]]
    n_treatment: int
    n_control: int
    mean_treatment: float
    mean_control: float
    uplift: float
    ci_low: float
    ci_high: float
    confidence: float
    p_value: float


class Simulation:
    """
    One bandit driven by a synthetic environment through the whole platform.

    Decisions come from the sampler, rewards go through the event logs, the
    reward pipeline and the trainer, exactly as in the service. Event time
    advances one second per decision; the sampler refreshes every
    ``refresh_period`` seconds. All randomness derives from ``seed``.

    Usage:
        ```
        with Simulation(config, BernoulliArms(means=[0.9, 0.1]), seed=7) as sim:
            report = sim.run(10_000)
        ```

    Attributes:
        config: The simulated bandit.
        env: The environment.
        platform: The platform under test.
    """

    def __init__(
        self,
        config: BanditConfig,
        env: Environment,
        seed: int = 0,
        params: Optional[PipelineParams] = None,
        data_dir: Optional[Union[str, Path]] = None,
    ) -> None:
        check_environment(config, env)
        self.config = config
        self.env = env
        self.seed = seed
        self.params = params or PipelineParams()
        self.now = 0.0
        streams = np.random.SeedSequence(seed).spawn(5)
        policy_rng, self._context_rng, self._reward_rng, self._delay_rng, self._ab_rng = (
            np.random.default_rng(s) for s in streams
        )
        self._tmp: Optional[tempfile.TemporaryDirectory] = None
        if data_dir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="eazybandit-")
            data_dir = self._tmp.name
        self._requests = itertools.count()
        self.platform = Platform(
            data_dir,
            SamplerSettings(refresh_period=self.params.refresh_period),
            self.params.flush_policy,
            clock=lambda: self.now,
            rng=policy_rng,
            request_ids=self._request_id,
            fsync=False,
        )
        if config.bandit_id in self.platform.store.list_bandits():
            raise InvalidConfig([f"bandit_id: {config.bandit_id} already exists in {data_dir}"])
        self.platform.store.put_config(config)
        self._arms = env.arms()
        self._index = {arm: i for i, arm in enumerate(self._arms)}
        self._weights = (
            GGIWeights.of(config.hyperparameters.ggi_weights)
            if isinstance(env, MultiObjectiveLinear)
            else None
        )
        self._rewards: List[Tuple[float, int, str, Outcome]] = []
        self._sequence = itertools.count()

    def __enter__(self) -> "Simulation":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    def close(self) -> None:
        """Remove the temporary data directory, if one was created."""
        if self._tmp is not None:
            self._tmp.cleanup()
            self._tmp = None

    def _request_id(self, bandit_id: str) -> str:
        return f"{bandit_id}-{next(self._requests):08d}"

    # ------------------------------------------
    # Environment side
    # ------------------------------------------

    def _values(self, x: np.ndarray) -> np.ndarray:
        expected = self.env.expected(x)
        if self._weights is not None:
            return np.array([ggi_scalarize(row, self._weights) for row in expected])
        return expected

    def _value(self, values: np.ndarray, arms: Sequence[int]) -> float:
        if self.config.algorithm.is_ranking:
            return float(1.0 - np.prod(1.0 - values[list(arms)]))
        return float(values[arms[0]])

    def _oracle(self, values: np.ndarray) -> float:
        if self.config.algorithm.is_ranking:
            top = np.sort(values)[::-1][: self.config.hyperparameters.ranking_k]
            return float(1.0 - np.prod(1.0 - top))
        return float(values.max())

    def _indices(self, arm: Union[str, List[str]]) -> List[int]:
        return [self._index[a] for a in ([arm] if isinstance(arm, str) else arm)]

    def _deliver(self, until: float) -> None:
        while self._rewards and self._rewards[0][0] < until:
            timestamp, _, request_id, outcome = heapq.heappop(self._rewards)
            self.platform.record_reward(
                self.config.bandit_id,
                request_id,
                outcome.values,
                outcome.click_position,
                timestamp,
            )

    def _schedule(self, request_id: str, outcome: Optional[Outcome]) -> None:
        if outcome is None:
            return
        delay = self.env.delay.draw(self._delay_rng) * STEP_SECONDS
        heapq.heappush(
            self._rewards, (self.now + delay, next(self._sequence), request_id, outcome)
        )

    # ------------------------------------------
    # Runs
    # ------------------------------------------

    def run(self, horizon: int) -> RunReport:
        """
        Serve ``horizon`` decisions and learn from their rewards.

        Returns:
            The run's report.

        Raises:
            SimulationFailed: If examples were poisoned, batches failed or
                impressions do not reconcile with examples and drops.
        """
        if horizon < 1:
            raise ValueError("horizon must be positive")
        bandit_id = self.config.bandit_id
        sampler = self.platform.sampler
        window = max(1, horizon // self.params.curve_points)
        final_steps = max(1, horizon // 10)
        latencies: List[float] = []

        regret = 0.0
        hits = final_hits = 0
        pulls = np.zeros(len(self._arms), dtype=np.int64)
        steps: List[int] = []
        curve: List[float] = []
        oracle_fraction: List[float] = []
        pull_fractions: List[Dict[str, float]] = []
        last_refresh = self.now

        for step in range(horizon):
            self._deliver(self.now)
            if self.now - last_refresh >= self.params.refresh_period:
                sampler.refresh_all()
                last_refresh = self.now

            raw = self.env.draw_context(self._context_rng)
            started = time.perf_counter()
            decision = sampler.sample(bandit_id, f"session-{step}", raw)
            if self.params.measure_latency:
                latencies.append((time.perf_counter() - started) * 1000.0)

            x = encode_context(self.config.context_schema, raw)
            arms = self._indices(decision.arm)
            values = self._values(x)
            chosen, best = self._value(values, arms), self._oracle(values)
            regret += max(best - chosen, 0.0)
            hit = chosen >= best - 1e-12
            hits += hit
            if step >= horizon - final_steps:
                final_hits += hit
            pulls[arms] += 1

            self._schedule(decision.request_id, self.env.respond(arms, x, self._reward_rng))

            if (step + 1) % window == 0 or step + 1 == horizon:
                span = step + 1 - (steps[-1] if steps else 0)
                steps.append(step + 1)
                curve.append(regret)
                oracle_fraction.append(hits / span)
                total = pulls.sum()
                pull_fractions.append(
                    {self._arms[i]: float(pulls[i] / total) for i in np.flatnonzero(pulls)}
                )
                hits = 0
                pulls[:] = 0
            self.now += STEP_SECONDS

        self._deliver(math.inf)
        self.platform.close()
        report = RunReport(
            bandit_id=bandit_id,
            algorithm=self.config.algorithm,
            seed=self.seed,
            horizon=horizon,
            steps=steps,
            cumulative_regret=curve,
            oracle_fraction=oracle_fraction,
            pull_fractions=pull_fractions,
            final_regret=regret,
            best_arm_fraction=final_hits / final_steps,
            convergence_step=self._convergence(steps, oracle_fraction),
            counters=self._counters(),
            final_version=self.platform.store.get_params(bandit_id).version,
            train_seq=self.platform.store.get_params(bandit_id).train_seq,
            latency_ms=_histogram(latencies) if self.params.measure_latency else None,
        )
        self._check(report)
        logger.info(
            "Run of %s (seed %d): regret %.3f, best-arm fraction %.3f",
            bandit_id,
            self.seed,
            report.final_regret,
            report.best_arm_fraction,
        )
        return report

    def _convergence(self, steps: List[int], fractions: List[float]) -> Optional[int]:
        start = len(fractions)
        while start > 0 and fractions[start - 1] >= self.params.convergence_threshold:
            start -= 1
        if start == len(fractions):
            return None
        return steps[start - 1] if start > 0 else 0

    def _counters(self) -> Dict[str, int]:
        counters = self.platform.metrics()
        counters["batches"] = self.platform.pipeline(self.config.bandit_id).emitter.next_seq - 1
        return counters

    def _check(self, report: RunReport) -> None:
        counters = report.counters
        if counters["decisions"] != counters["impressions"] or counters["impressions"] != (
            counters["examples"] + counters["dropped_examples"]
        ):
            raise SimulationFailed(f"Impressions do not reconcile: {counters}")
        if counters["failed_batches"]:
            raise SimulationFailed(f"{counters['failed_batches']} batches failed")
        if self.params.fail_on_poison and counters["poisoned_examples"]:
            raise SimulationFailed(f"{counters['poisoned_examples']} examples were poisoned")

    # ------------------------------------------
    # A/B test
    # ------------------------------------------

    def freeze(self) -> Dict[str, Any]:
        """Freeze the bandit through the admin API."""
        return self.platform.sampler.admin_freeze(self.config.bandit_id)

    def _realized(self, arms: Sequence[int], x: np.ndarray) -> float:
        outcome = self.env.respond(arms, x, self._ab_rng)
        if outcome is None:
            return 0.0
        if self._weights is not None:
            return ggi_scalarize(outcome.values, self._weights)
        return float(outcome.values[0])

    def ab_test(
        self, control: Union[str, List[str]], horizon: int, confidence: float = 0.95
    ) -> ABReport:
        """
        Split ``horizon`` decisions evenly between the frozen bandit and a control.

        Even steps go to the bandit, odd steps to the control experience.
        Rewards are measured, not learned from.

        Raises:
            NotFrozen: If the bandit is still learning.
            EnvironmentMismatch: If the control names unknown arms.
        """
        bandit_id = self.config.bandit_id
        if not self.platform.store.get_config(bandit_id).is_frozen:
            raise NotFrozen(bandit_id)
        try:
            control_arms = self._indices(control)
        except KeyError as e:
            raise EnvironmentMismatch(f"Control arm {e} is not part of {bandit_id}") from e
        sampler = self.platform.sampler
        sampler.refresh(bandit_id)

        treatment: List[float] = []
        baseline: List[float] = []
        # measurement traffic stays out of the clickstream
        sink, sampler.on_impression = sampler.on_impression, None
        try:
            for step in range(horizon):
                raw = self.env.draw_context(self._ab_rng)
                x = encode_context(self.config.context_schema, raw)
                if step % 2 == 0:
                    decision = sampler.sample(bandit_id, f"ab-{step}", raw)
                    treatment.append(self._realized(self._indices(decision.arm), x))
                else:
                    baseline.append(self._realized(control_arms, x))
                self.now += STEP_SECONDS
        finally:
            sampler.on_impression = sink
        return _ab_report(bandit_id, control, treatment, baseline, confidence)


def _ab_report(
    bandit_id: str,
    control: Union[str, List[str]],
    treatment: Sequence[float],
    baseline: Sequence[float],
    confidence: float,
) -> ABReport:
    t, c = np.asarray(treatment), np.asarray(baseline)
    if len(t) < 2 or len(c) < 2:
        raise ValueError("An A/B test needs at least two decisions per side")
    uplift = float(t.mean() - c.mean())
    se = math.sqrt(t.var(ddof=1) / len(t) + c.var(ddof=1) / len(c))
    half = float(norm.ppf(0.5 + confidence / 2.0)) * se
    if se > 0:
        p_value = float(2.0 * norm.sf(abs(uplift) / se))
    else:
        p_value = 1.0 if uplift == 0 else 0.0
    return ABReport(
        bandit_id=bandit_id,
        control=control,
        n_treatment=len(t),
        n_control=len(c),
        mean_treatment=float(t.mean()),
        mean_control=float(c.mean()),
        uplift=uplift,
        ci_low=uplift - half,
        ci_high=uplift + half,
        confidence=confidence,
        p_value=p_value,
    )


def _histogram(latencies: Sequence[float]) -> Dict[str, int]:
    edges = (0.0,) + LATENCY_BUCKETS_MS
    counts, _ = np.histogram(np.asarray(latencies, dtype=np.float64), bins=edges)
    return {f"le_{edge:g}": int(n) for edge, n in zip(LATENCY_BUCKETS_MS, counts)}


def run_experiment(
    config: BanditConfig,
    env: Environment,
    horizon: int,
    seed: int = 0,
    params: Optional[PipelineParams] = None,
    data_dir: Optional[Union[str, Path]] = None,
) -> RunReport:
    """
    Run one closed-loop experiment.

    Args:
        config: The bandit to simulate.
        env: The environment answering its decisions.
        horizon: Number of decisions.
        seed: Seed of every random draw in the run.
        params: Pipeline and reporting parameters.
        data_dir: Where the platform keeps its files; a temporary directory when omitted.

    Returns:
        The run's report; identical inputs give an identical report.
    """
    with Simulation(config, env, seed, params, data_dir) as simulation:
        return simulation.run(horizon)


def freeze_and_ab(
    simulation: Simulation, control: Union[str, List[str]], horizon: int, confidence: float = 0.95
) -> ABReport:
    """
    A/B test a trained bandit's frozen decisions against a control experience.

    Raises:
        NotFrozen: If the bandit has not been frozen.
    """
    return simulation.ab_test(control, horizon, confidence)


# ------------------------------------------
# Sweeps
# ------------------------------------------


class SweepRun(BaseModel):
    """One point of a sweep grid with one seed."""

    params: Dict[str, Any]
    seed: int
    report: RunReport


def _assign(target: Dict[str, Any], path: List[str], value: Any) -> None:
    for key in path[:-1]:
        target = target.setdefault(key, {})
    target[path[-1]] = value


def apply_overrides(
    config: BanditConfig, params: PipelineParams, overrides: Mapping[str, Any]
) -> Tuple[BanditConfig, PipelineParams]:
    """
    Set dotted parameters on a configuration and pipeline parameters.

    Hyperparameter names may be given bare, ``epsilon`` for
    ``hyperparameters.epsilon``.

    Raises:
        ValueError: If a parameter exists in neither model.
    """
    config_data = config.model_dump(mode="json")
    params_data = params.model_dump(mode="json")
    for key, value in overrides.items():
        path = key.split(".")
        if path[0] in HyperParams.model_fields:
            path = ["hyperparameters"] + path
        if path[0] in PipelineParams.model_fields:
            _assign(params_data, path, value)
        elif path[0] in BanditConfig.model_fields:
            _assign(config_data, path, value)
        else:
            raise ValueError(f"Unknown sweep parameter: {key}")
    return BanditConfig.model_validate(config_data), PipelineParams.model_validate(params_data)


def _sweep_run(
    config: BanditConfig,
    env: Environment,
    point: Dict[str, Any],
    seed: int,
    horizon: int,
    params: PipelineParams,
) -> SweepRun:
    run_config, run_params = apply_overrides(config, params, point)
    report = run_experiment(run_config, env, horizon, seed, run_params)
    return SweepRun(params=point, seed=seed, report=report)


def sweep(
    config: BanditConfig,
    env: Environment,
    grid: Mapping[str, Sequence[Any]],
    seeds: Sequence[int],
    horizon: int,
    params: Optional[PipelineParams] = None,
    n_jobs: int = 1,
) -> List[SweepRun]:
    """
    Run every point of a parameter grid with every seed.

    An empty grid is a single point. Runs are isolated from each other and
    may run in parallel.

    Args:
        config: Base configuration.
        env: The environment.
        grid: Parameter name to the values it takes.
        seeds: Seeds every point is run with.
        horizon: Decisions per run.
        params: Base pipeline parameters.
        n_jobs: Parallel workers, as understood by joblib.

    Returns:
        Runs in grid order, seeds varying fastest.
    """
    params = params or PipelineParams()
    names = list(grid)
    points = [dict(zip(names, values)) for values in itertools.product(*grid.values())]
    for point in points:
        apply_overrides(config, params, point)
    return Parallel(n_jobs=n_jobs)(
        delayed(_sweep_run)(config, env, point, seed, horizon, params)
        for point in points
        for seed in seeds
    )


def results_table(runs: Sequence[SweepRun]) -> pd.DataFrame:
    """One row per run: its parameters, seed and headline measurements."""
    rows = [
        {
            **run.params,
            "seed": run.seed,
            "final_regret": run.report.final_regret,
            "best_arm_fraction": run.report.best_arm_fraction,
            "convergence_step": run.report.convergence_step,
            "batches": run.report.counters.get("batches", 0),
        }
        for run in runs
    ]
    return pd.DataFrame(rows)


# ------------------------------------------
# Output
# ------------------------------------------


def write_report(report: BaseModel, path: Union[str, Path]) -> Path:
    """Write a report as indented, key-sorted JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(
        orjson.dumps(report.model_dump(mode="json"), option=JSON_OPTIONS | orjson.OPT_INDENT_2)
    )
    return path


def write_plots(report: RunReport, out_dir: Union[str, Path]) -> List[Path]:
    """
    Plot the regret curve and the pull fractions as SVG files.

    Needs matplotlib; without it nothing is written and a warning is logged.
    """
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib is not installed, skipping plots")
        return []

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    matplotlib.rcParams["svg.hashsalt"] = "eazybandit"
    metadata = {"Date": None}

    fig, ax = plt.subplots()
    ax.plot(report.steps, report.cumulative_regret)
    ax.set_xlabel("decisions")
    ax.set_ylabel("cumulative regret")
    regret_path = out_dir / "regret.svg"
    fig.savefig(regret_path, format="svg", metadata=metadata)
    plt.close(fig)

    arms = sorted({arm for window in report.pull_fractions for arm in window})
    fig, ax = plt.subplots()
    ax.stackplot(
        report.steps,
        [[window.get(arm, 0.0) for window in report.pull_fractions] for arm in arms],
        labels=arms,
    )
    ax.set_xlabel("decisions")
    ax.set_ylabel("pull fraction")
    if len(arms) <= 10:
        ax.legend(loc="upper left", fontsize="small")
    pulls_path = out_dir / "pulls.svg"
    fig.savefig(pulls_path, format="svg", metadata=metadata)
    plt.close(fig)
    return [regret_path, pulls_path]
