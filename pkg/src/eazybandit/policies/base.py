"""Algorithm-level policies binding a bandit configuration to its state and update rules."""

import logging
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from eazybandit.core import (
    Algorithm,
    BanditConfig,
    ExplicitArms,
    LinearModel,
    SlottedArms,
    enumerate_arms,
)
from eazybandit.events import Arm, TrainingExample
from eazybandit.exceptions import (
    AlgorithmMismatch,
    DimensionMismatch,
    LengthMismatch,
    MissingProbability,
    NonBinaryLabel,
    PolicyError,
    UnknownArm,
    ValidationFailure,
)
from eazybandit.policies.linear import (
    BLRState,
    LinearState,
    RLSState,
    blr_update,
    igw_distribution,
    igw_gamma,
    linear_ts_sample,
    mean_scores,
    rls_update,
    sample_weights,
)
from eazybandit.policies.mab import (
    BetaState,
    EGState,
    Exp3State,
    beta_sample,
    beta_update,
    eg_sample,
    eg_update,
    exp3_distribution,
    exp3_update,
)
from eazybandit.policies.structured import (
    CascadeState,
    GGIWeights,
    GreedySearchBudget,
    cascade_exploit,
    cascade_sample,
    cascade_update,
    ggi_scalarize,
    ggi_ts_sample,
    greedy_search,
)

logger = logging.getLogger(__name__)

#: Row name of the single model shared by all arms of a slotted space.
SHARED_MODEL = "__shared__"


@dataclass(frozen=True)
class Choice:
    """A sampled arm and, where the policy knows it, the probability it was drawn with."""

    arm: Arm
    probability: Optional[float] = None


@dataclass(frozen=True, eq=False)
class GGIState:
    """One independent linear posterior per objective."""

    objectives: Tuple[LinearState, ...]


@dataclass
class ApplyResult:
    """Outcome of folding a batch into a state."""

    state: Any
    applied: int = 0
    poisoned: List[Tuple[str, str]] = field(default_factory=list)


class Policy(ABC):
    """
    Abstract base for the per-algorithm policies.

    A policy is stateless itself: it holds the configuration and works on the
    immutable state values of the policy modules. Subclasses implement the
    algorithm's learning and exploit selection, its example update and its
    parameter document encoding.

    Attributes:
        config: Configuration of the bandit the policy serves.
    """

    algorithm: Algorithm

    def __init__(self, config: BanditConfig) -> None:
        if config.algorithm is not self.algorithm:
            raise AlgorithmMismatch(
                f"{type(self).__name__} cannot serve {config.algorithm.value} bandits"
            )
        self.config = config
        self.params = config.hyperparameters

    @abstractmethod
    def initial_state(self) -> Any:
        """Return the prior state a new bandit starts from."""
        raise NotImplementedError

    @abstractmethod
    def sample(self, state: Any, x: np.ndarray, rng: np.random.Generator, step: int = 0) -> Choice:
        """
        Select an arm while learning.

        Args:
            state: Current policy state.
            x: Encoded context.
            rng: Seeded random source.
            step: Number of batches the state has absorbed.

        Returns:
            The selected arm.
        """
        raise NotImplementedError

    @abstractmethod
    def exploit(self, state: Any, x: np.ndarray, rng: np.random.Generator) -> Choice:
        """Select the posterior-mean best arm, as a frozen bandit does."""
        raise NotImplementedError

    @abstractmethod
    def update(self, state: Any, example: TrainingExample) -> Any:
        """
        Fold one example into a state.

        Raises:
            PolicyError: If the example cannot be applied.
        """
        raise NotImplementedError

    @abstractmethod
    def encode(self, state: Any) -> Dict[str, Any]:
        """Serialise a state to the JSON-ready parameter payload."""
        raise NotImplementedError

    @abstractmethod
    def decode(self, payload: Dict[str, Any]) -> Any:
        """
        Rebuild a state from its parameter payload.

        Raises:
            AlgorithmMismatch: If the payload does not belong to this bandit's arms.
        """
        raise NotImplementedError

    def apply(self, state: Any, examples: Sequence[TrainingExample]) -> ApplyResult:
        """
        Fold examples into a state in list order.

        An example the policy rejects is skipped and reported as poisoned; the
        rest of the batch still applies.
        """
        result = ApplyResult(state=state)
        for example in examples:
            try:
                result.state = self.update(result.state, example)
            except (PolicyError, ValidationFailure) as e:
                logger.warning(
                    "Poisoned example %s for %s: %s", example.request_id, self.config.bandit_id, e
                )
                result.poisoned.append((example.request_id, str(e)))
            else:
                result.applied += 1
        return result

    def check_state(self, state: Any) -> None:
        """
        Raises:
            AlgorithmMismatch: If the state does not belong to this policy.
        """
        if not isinstance(state, self.state_type):
            raise AlgorithmMismatch(
                f"{type(state).__name__} is not a {self.algorithm.value} state"
            )

    @property
    @abstractmethod
    def state_type(self) -> type:
        """State class this policy works on."""
        raise NotImplementedError

    def _scalar_reward(self, example: TrainingExample) -> float:
        if len(example.reward) != 1:
            raise LengthMismatch(f"Expected one reward value, got {len(example.reward)}")
        return float(example.reward[0])

    def _single_arm(self, example: TrainingExample) -> str:
        if not isinstance(example.arm, str):
            raise UnknownArm(example.arm)
        return example.arm


def _arrays(payload: Dict[str, Any], arms: Sequence[str], *names: str) -> List[np.ndarray]:
    if list(payload.get("arms", [])) != list(arms):
        raise AlgorithmMismatch("Parameter document arms do not match the configured arm space")
    out = []
    for name in names:
        array = np.asarray(payload[name], dtype=np.float64)
        array.flags.writeable = False
        out.append(array)
    return out


# ------------------------------------------
# Non-contextual policies
# ------------------------------------------


class _ArmPolicy(Policy):
    def __init__(self, config: BanditConfig) -> None:
        super().__init__(config)
        self.arms = enumerate_arms(config.arm_space)


class EpsilonGreedyPolicy(_ArmPolicy):
    """Epsilon greedy over running mean rewards."""

    algorithm = Algorithm.EPSILON_GREEDY
    state_type = EGState

    def initial_state(self) -> EGState:
        return EGState.initial(self.arms)

    def sample(
        self, state: EGState, x: np.ndarray, rng: np.random.Generator, step: int = 0
    ) -> Choice:
        epsilon = self.params.epsilon
        arm = eg_sample(state, epsilon, rng)
        greedy = state.arms[int(np.argmax(state.means))]
        return Choice(arm, epsilon / len(state.arms) + (1.0 - epsilon) * (arm == greedy))

    def exploit(self, state: EGState, x: np.ndarray, rng: np.random.Generator) -> Choice:
        return Choice(eg_sample(state, 0.0, rng), 1.0)

    def update(self, state: EGState, example: TrainingExample) -> EGState:
        return eg_update(state, self._single_arm(example), self._scalar_reward(example))

    def encode(self, state: EGState) -> Dict[str, Any]:
        return {
            "arms": list(state.arms),
            "counts": state.counts.tolist(),
            "means": state.means.tolist(),
        }

    def decode(self, payload: Dict[str, Any]) -> EGState:
        (means,) = _arrays(payload, self.arms, "means")
        counts = np.asarray(payload["counts"], dtype=np.int64)
        counts.flags.writeable = False
        return EGState(arms=tuple(self.arms), counts=counts, means=means)


class ThompsonBernoulliPolicy(_ArmPolicy):
    """Beta-Bernoulli Thompson sampling."""

    algorithm = Algorithm.THOMPSON_BERNOULLI
    state_type = BetaState

    def initial_state(self) -> BetaState:
        return BetaState.initial(self.arms)

    def sample(
        self, state: BetaState, x: np.ndarray, rng: np.random.Generator, step: int = 0
    ) -> Choice:
        return Choice(beta_sample(state, rng))

    def exploit(self, state: BetaState, x: np.ndarray, rng: np.random.Generator) -> Choice:
        return Choice(state.arms[int(np.argmax(state.posterior_means))], 1.0)

    def update(self, state: BetaState, example: TrainingExample) -> BetaState:
        return beta_update(state, self._single_arm(example), self._scalar_reward(example))

    def encode(self, state: BetaState) -> Dict[str, Any]:
        return {
            "arms": list(state.arms),
            "alpha": state.alpha.tolist(),
            "beta": state.beta.tolist(),
        }

    def decode(self, payload: Dict[str, Any]) -> BetaState:
        alpha, beta = _arrays(payload, self.arms, "alpha", "beta")
        return BetaState(arms=tuple(self.arms), alpha=alpha, beta=beta)


class Exp3Policy(_ArmPolicy):
    """Exp3 with importance weighting by the logged sampling probability."""

    algorithm = Algorithm.EXP3
    state_type = Exp3State

    def initial_state(self) -> Exp3State:
        return Exp3State.initial(self.arms)

    def sample(
        self, state: Exp3State, x: np.ndarray, rng: np.random.Generator, step: int = 0
    ) -> Choice:
        probabilities = exp3_distribution(state, self.params.exp3_gamma)
        index = int(rng.choice(len(state.arms), p=probabilities))
        return Choice(state.arms[index], float(probabilities[index]))

    def exploit(self, state: Exp3State, x: np.ndarray, rng: np.random.Generator) -> Choice:
        return Choice(state.arms[int(np.argmax(state.weights))], 1.0)

    def update(self, state: Exp3State, example: TrainingExample) -> Exp3State:
        if example.probability is None:
            raise MissingProbability(
                f"Exp3 example {example.request_id} carries no sampling probability"
            )
        return exp3_update(
            state,
            self._single_arm(example),
            self._scalar_reward(example),
            example.probability,
            self.params.exp3_gamma,
        )

    def encode(self, state: Exp3State) -> Dict[str, Any]:
        return {"arms": list(state.arms), "weights": state.weights.tolist()}

    def decode(self, payload: Dict[str, Any]) -> Exp3State:
        (weights,) = _arrays(payload, self.arms, "weights")
        return Exp3State(arms=tuple(self.arms), weights=weights)


class CascadePolicy(_ArmPolicy):
    """Cascade Thompson sampling over ranked lists of ``ranking_k`` items."""

    algorithm = Algorithm.CASCADE_TS
    state_type = CascadeState

    def initial_state(self) -> CascadeState:
        return CascadeState.initial(self.arms)

    def sample(
        self, state: CascadeState, x: np.ndarray, rng: np.random.Generator, step: int = 0
    ) -> Choice:
        return Choice(cascade_sample(state, self.params.ranking_k, rng))

    def exploit(self, state: CascadeState, x: np.ndarray, rng: np.random.Generator) -> Choice:
        return Choice(cascade_exploit(state, self.params.ranking_k), 1.0)

    def update(self, state: CascadeState, example: TrainingExample) -> CascadeState:
        shown = [example.arm] if isinstance(example.arm, str) else list(example.arm)
        return cascade_update(state, shown, example.click_position)

    def encode(self, state: CascadeState) -> Dict[str, Any]:
        return {
            "arms": list(state.arms),
            "alpha": state.alpha.tolist(),
            "beta": state.beta.tolist(),
        }

    def decode(self, payload: Dict[str, Any]) -> CascadeState:
        alpha, beta = _arrays(payload, self.arms, "alpha", "beta")
        return CascadeState(arms=tuple(self.arms), alpha=alpha, beta=beta)


# ------------------------------------------
# Linear policies
# ------------------------------------------


class _LinearBase(Policy):
    """
    Shared plumbing of the linear policies.

    Explicit spaces keep one model per arm over the context ``x``. Slotted
    spaces keep one shared model over ``kron(one_hot(assignment), x)``, so an
    arm's score is a sum of per-slot utilities and greedy search applies.
    """

    def __init__(self, config: BanditConfig) -> None:
        super().__init__(config)
        self.model = config.linear_model
        self.context_dim = config.context_dim
        space = config.arm_space
        self.slotted: Optional[SlottedArms] = space if isinstance(space, SlottedArms) else None
        if self.slotted is None:
            assert isinstance(space, ExplicitArms)
            self.arms: List[str] = list(space.arm_ids)
            self.dim = self.context_dim
        else:
            self.arms = [SHARED_MODEL]
            counts = self.slotted.option_counts
            self.offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(int)
            self.dim = self.context_dim * int(sum(counts))
        self.budget = GreedySearchBudget(
            max_passes=self.params.greedy_passes,
            deadline_ms=self.params.latency_budget,
            restarts=self.params.greedy_restarts,
        )

    def _initial(self) -> LinearState:
        cls = BLRState if self.model is LinearModel.BLR else RLSState
        return cls.initial(self.arms, self.dim, self.params.prior_variance)

    def features(self, example_arm: Arm, x: np.ndarray) -> Tuple[str, np.ndarray]:
        """Model row and feature vector an observation of ``example_arm`` at ``x`` updates."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.context_dim,):
            raise DimensionMismatch(self.context_dim, int(x.size))
        if not isinstance(example_arm, str):
            raise UnknownArm(example_arm)
        if self.slotted is None:
            return example_arm, x
        try:
            assignment = self.slotted.assignment(example_arm)
        except ValueError:
            raise UnknownArm(example_arm)
        one_hot = np.zeros(int(sum(self.slotted.option_counts)))
        one_hot[self.offsets + np.asarray(assignment, dtype=int)] = 1.0
        return SHARED_MODEL, np.kron(one_hot, x)

    def utilities(self, weights: np.ndarray, x: np.ndarray) -> List[np.ndarray]:
        """Per-slot option utilities of a shared weight vector at ``x``."""
        assert self.slotted is not None
        per_option = weights.reshape(-1, self.context_dim) @ x
        return [
            per_option[offset : offset + count]
            for offset, count in zip(self.offsets, self.slotted.option_counts)
        ]

    def greedy(self, utilities: List[np.ndarray], rng: np.random.Generator) -> str:
        """Greedy slot search over additive per-slot utilities."""
        assert self.slotted is not None

        def score(assignment: Tuple[int, ...]) -> float:
            return float(sum(u[a] for u, a in zip(utilities, assignment)))

        return greedy_search(score, self.slotted, self.budget, rng).arm

    def all_scores(self, utilities: List[np.ndarray]) -> np.ndarray:
        """Additive scores of every arm in enumeration order."""
        total = utilities[0]
        for u in utilities[1:]:
            total = np.add.outer(total, u).ravel()
        return total

    def _update_linear(
        self, state: LinearState, example: TrainingExample, y: float
    ) -> LinearState:
        row, phi = self.features(example.arm, np.asarray(example.context))
        if isinstance(state, BLRState):
            if y not in (0, 1):
                raise NonBinaryLabel(y)
            return blr_update(state, row, [(phi, y)])
        return rls_update(state, row, phi, y)

    def _apply_linear(
        self, states: Sequence[LinearState], examples: Sequence[TrainingExample]
    ) -> Tuple[List[LinearState], int, List[Tuple[str, str]]]:
        """
        Fold a batch into one linear state per objective.

        RLS folds example by example. BLR gathers each model row's valid
        examples and runs one Laplace update per row, rows in first-seen order.
        A row whose update fails leaves its state untouched and poisons every
        example it gathered.
        """
        states = list(states)
        poisoned: List[Tuple[str, str]] = []
        applied = 0
        blr = isinstance(states[0], BLRState)
        groups: "OrderedDict[str, List[Tuple[str, np.ndarray, float]]]" = OrderedDict()
        for example in examples:
            try:
                if len(example.reward) != len(states):
                    raise LengthMismatch(
                        f"Expected {len(states)} reward values, got {len(example.reward)}"
                    )
                row, phi = self.features(example.arm, np.asarray(example.context))
                if blr:
                    y = float(example.reward[0])
                    if y not in (0.0, 1.0):
                        raise NonBinaryLabel(example.reward[0])
                    states[0].index_of(row)
                    groups.setdefault(row, []).append((example.request_id, phi, y))
                else:
                    updated = [
                        rls_update(state, row, phi, float(y))  # type: ignore[arg-type]
                        for state, y in zip(states, example.reward)
                    ]
                    states = updated
            except (PolicyError, ValidationFailure) as e:
                logger.warning(
                    "Poisoned example %s for %s: %s", example.request_id, self.config.bandit_id, e
                )
                poisoned.append((example.request_id, str(e)))
            else:
                if not blr:
                    applied += 1
        for row, gathered in groups.items():
            batch = [(phi, y) for _, phi, y in gathered]
            try:
                states[0] = blr_update(states[0], row, batch)  # type: ignore[arg-type]
            except PolicyError as e:
                logger.warning(
                    "Poisoned %d examples of row %s for %s: %s",
                    len(gathered),
                    row,
                    self.config.bandit_id,
                    e,
                )
                poisoned.extend((request_id, str(e)) for request_id, _, _ in gathered)
            else:
                applied += len(gathered)
        return states, applied, poisoned

    def _encode_linear(self, state: LinearState) -> Dict[str, Any]:
        if isinstance(state, BLRState):
            return {
                "model": LinearModel.BLR.value,
                "arms": list(state.arms),
                "dim": state.dim,
                "means": state.means.tolist(),
                "precisions": state.precisions.tolist(),
            }
        return {
            "model": LinearModel.RLS.value,
            "arms": list(state.arms),
            "dim": state.dim,
            "means": state.means.tolist(),
            "covariances": state.covariances.tolist(),
        }

    def _decode_linear(self, payload: Dict[str, Any]) -> LinearState:
        if payload.get("model") != self.model.value or payload.get("dim") != self.dim:
            raise AlgorithmMismatch(
                "Parameter document does not match the configured linear model"
            )
        if self.model is LinearModel.BLR:
            means, precisions = _arrays(payload, self.arms, "means", "precisions")
            return BLRState(
                arms=tuple(self.arms),
                means=means.reshape(len(self.arms), self.dim),
                precisions=precisions.reshape(len(self.arms), self.dim),
            )
        means, covariances = _arrays(payload, self.arms, "means", "covariances")
        return RLSState(
            arms=tuple(self.arms),
            means=means.reshape(len(self.arms), self.dim),
            covariances=covariances.reshape(len(self.arms), self.dim, self.dim),
        )

    def _mean_arm(self, state: LinearState, x: np.ndarray, rng: np.random.Generator) -> str:
        if self.slotted is None:
            return state.arms[int(np.argmax(mean_scores(state, x)))]
        return self.greedy(self.utilities(state.means[0], x), rng)


class LinearPolicy(_LinearBase):
    """Linear Thompson sampling, epsilon greedy or Inverse Gap Weighting over RLS or BLR."""

    algorithm = Algorithm.LINEAR_TS

    def __init__(self, config: BanditConfig) -> None:
        self.algorithm = config.algorithm
        if not config.algorithm.is_linear:
            raise AlgorithmMismatch(f"{config.algorithm.value} is not a linear algorithm")
        super().__init__(config)

    @property
    def state_type(self) -> type:
        return BLRState if self.model is LinearModel.BLR else RLSState

    def initial_state(self) -> LinearState:
        return self._initial()

    def sample(
        self, state: LinearState, x: np.ndarray, rng: np.random.Generator, step: int = 0
    ) -> Choice:
        algorithm = self.config.algorithm
        if algorithm is Algorithm.LINEAR_TS:
            if self.slotted is None:
                return Choice(linear_ts_sample(state, x, rng))
            return Choice(self.greedy(self.utilities(sample_weights(state, rng)[0], x), rng))

        if algorithm is Algorithm.LINEAR_EG:
            if rng.random() < self.params.epsilon:
                if self.slotted is None:
                    return Choice(state.arms[int(rng.integers(len(state.arms)))])
                counts = self.slotted.option_counts
                return Choice(self.slotted.arm_id(tuple(int(rng.integers(c)) for c in counts)))
            return Choice(self._mean_arm(state, x, rng))

        if self.slotted is None:
            arms = state.arms
            scores = mean_scores(state, x)
        else:
            arms = tuple(enumerate_arms(self.slotted))
            scores = self.all_scores(self.utilities(state.means[0], x))
            if isinstance(state, BLRState):
                scores = 1.0 / (1.0 + np.exp(-scores))
        probabilities = igw_distribution(scores, igw_gamma(self.params.igw_gamma0, step))
        index = int(rng.choice(len(arms), p=probabilities))
        return Choice(arms[index], float(probabilities[index]))

    def exploit(self, state: LinearState, x: np.ndarray, rng: np.random.Generator) -> Choice:
        return Choice(self._mean_arm(state, x, rng), 1.0)

    def update(self, state: LinearState, example: TrainingExample) -> LinearState:
        if len(example.reward) != 1:
            raise LengthMismatch(f"Expected one reward value, got {len(example.reward)}")
        return self._update_linear(state, example, float(example.reward[0]))

    def apply(self, state: LinearState, examples: Sequence[TrainingExample]) -> ApplyResult:
        states, applied, poisoned = self._apply_linear([state], examples)
        return ApplyResult(state=states[0], applied=applied, poisoned=poisoned)

    def encode(self, state: LinearState) -> Dict[str, Any]:
        return self._encode_linear(state)

    def decode(self, payload: Dict[str, Any]) -> LinearState:
        return self._decode_linear(payload)


class GGIPolicy(_LinearBase):
    """Multi-objective Thompson sampling scalarised by the Generalized Gini Index."""

    algorithm = Algorithm.MULTI_OBJECTIVE_GGI
    state_type = GGIState

    def __init__(self, config: BanditConfig) -> None:
        super().__init__(config)
        self.weights = GGIWeights.of(self.params.ggi_weights)

    def initial_state(self) -> GGIState:
        return GGIState(objectives=tuple(self._initial() for _ in range(len(self.weights))))

    def sample(
        self, state: GGIState, x: np.ndarray, rng: np.random.Generator, step: int = 0
    ) -> Choice:
        if self.slotted is None:
            return Choice(ggi_ts_sample(state.objectives, x, self.weights, rng))
        draws = [sample_weights(objective, rng)[0] for objective in state.objectives]
        return Choice(self._ggi_greedy([self.utilities(w, x) for w in draws], rng))

    def exploit(self, state: GGIState, x: np.ndarray, rng: np.random.Generator) -> Choice:
        if self.slotted is None:
            scores = np.vstack([mean_scores(objective, x) for objective in state.objectives])
            scalarised = np.sort(scores, axis=0).T @ self.weights.values
            return Choice(state.objectives[0].arms[int(np.argmax(scalarised))], 1.0)
        per_objective = [self.utilities(objective.means[0], x) for objective in state.objectives]
        return Choice(self._ggi_greedy(per_objective, rng), 1.0)

    def _ggi_greedy(self, per_objective: List[List[np.ndarray]], rng: np.random.Generator) -> str:
        assert self.slotted is not None

        def score(assignment: Tuple[int, ...]) -> float:
            values = [
                sum(u[a] for u, a in zip(utilities, assignment)) for utilities in per_objective
            ]
            return ggi_scalarize(values, self.weights)

        return greedy_search(score, self.slotted, self.budget, rng).arm

    def update(self, state: GGIState, example: TrainingExample) -> GGIState:
        states, _, poisoned = self._apply_linear(state.objectives, [example])
        if poisoned:
            raise LengthMismatch(poisoned[0][1])
        return GGIState(objectives=tuple(states))

    def apply(self, state: GGIState, examples: Sequence[TrainingExample]) -> ApplyResult:
        states, applied, poisoned = self._apply_linear(state.objectives, examples)
        return ApplyResult(
            state=GGIState(objectives=tuple(states)), applied=applied, poisoned=poisoned
        )

    def encode(self, state: GGIState) -> Dict[str, Any]:
        return {"objectives": [self._encode_linear(objective) for objective in state.objectives]}

    def decode(self, payload: Dict[str, Any]) -> GGIState:
        objectives = payload.get("objectives", [])
        if len(objectives) != len(self.weights):
            raise AlgorithmMismatch("Parameter document holds the wrong number of objectives")
        return GGIState(objectives=tuple(self._decode_linear(o) for o in objectives))


_POLICIES: Dict[Algorithm, type] = {
    Algorithm.EPSILON_GREEDY: EpsilonGreedyPolicy,
    Algorithm.THOMPSON_BERNOULLI: ThompsonBernoulliPolicy,
    Algorithm.EXP3: Exp3Policy,
    Algorithm.CASCADE_TS: CascadePolicy,
    Algorithm.LINEAR_TS: LinearPolicy,
    Algorithm.LINEAR_EG: LinearPolicy,
    Algorithm.LINEAR_IGW: LinearPolicy,
    Algorithm.MULTI_OBJECTIVE_GGI: GGIPolicy,
}


def policy_for(config: BanditConfig) -> Policy:
    """Instantiate the policy serving a configuration's algorithm."""
    return _POLICIES[config.algorithm](config)  # type: ignore[no-any-return]


__all__ = [
    "ApplyResult",
    "CascadePolicy",
    "Choice",
    "EpsilonGreedyPolicy",
    "Exp3Policy",
    "GGIPolicy",
    "GGIState",
    "LinearPolicy",
    "Policy",
    "SHARED_MODEL",
    "ThompsonBernoulliPolicy",
    "policy_for",
]
