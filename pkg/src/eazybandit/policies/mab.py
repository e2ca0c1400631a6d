"""Non-contextual policies: Epsilon Greedy, Beta-Bernoulli Thompson Sampling and Exp3.

Every state is an immutable value; update functions return a new state and
leave their input untouched.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from eazybandit.exceptions import (
    EmptyArmSet,
    NonBinaryReward,
    RewardOutOfRange,
    UnknownArm,
    ZeroProbability,
)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class ArmIndexed:
    """Base for states holding one parameter row per arm."""

    arms: Tuple[str, ...]
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_index", {arm: i for i, arm in enumerate(self.arms)})

    def index_of(self, arm: str) -> int:
        """Position of an arm in the state's arrays.

        Raises:
            UnknownArm: If the arm is not part of the state.
        """
        try:
            return self._index[arm]
        except (KeyError, TypeError):
            raise UnknownArm(arm)

    def _require_arms(self) -> None:
        if not self.arms:
            raise EmptyArmSet("No arms to choose from")


@dataclass(frozen=True, eq=False)
class EGState(ArmIndexed):
    """Per-arm pull counts and running mean rewards."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    means: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def initial(cls, arms: Sequence[str]) -> "EGState":
        """Fresh state: no pulls, zero means."""
        return cls(
            arms=tuple(arms),
            counts=_frozen(np.zeros(len(arms), dtype=np.int64)),
            means=_frozen(np.zeros(len(arms))),
        )


@dataclass(frozen=True, eq=False)
class BetaState(ArmIndexed):
    """Per-arm Beta posterior over a Bernoulli success probability."""

    alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def initial(cls, arms: Sequence[str], prior: Tuple[float, float] = (1.0, 1.0)) -> "BetaState":
        """Fresh state under a ``Beta(prior)`` prior, uniform by default."""
        return cls(
            arms=tuple(arms),
            alpha=_frozen(np.full(len(arms), float(prior[0]))),
            beta=_frozen(np.full(len(arms), float(prior[1]))),
        )

    @property
    def posterior_means(self) -> np.ndarray:
        """Posterior mean ``α / (α + β)`` of every arm."""
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True, eq=False)
class Exp3State(ArmIndexed):
    """Per-arm exponential weights, rescaled so the largest is 1."""

    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def initial(cls, arms: Sequence[str]) -> "Exp3State":
        """Fresh state with equal weights."""
        return cls(arms=tuple(arms), weights=_frozen(np.ones(len(arms))))


# ------------------------------------------
# Epsilon Greedy
# ------------------------------------------


def eg_sample(state: EGState, epsilon: float, rng: np.random.Generator) -> str:
    """
    Pick an arm epsilon-greedily.

    With probability ``epsilon`` a uniformly random arm is returned; otherwise
    the arm with the highest mean reward, ties broken by the smallest index.

    Args:
        state: Current estimates.
        epsilon: Exploration probability in [0, 1].
        rng: Seeded random source.

    Returns:
        The chosen arm id.

    Raises:
        EmptyArmSet: If the state has no arms.
    """
    state._require_arms()
    if rng.random() < epsilon:
        return state.arms[int(rng.integers(len(state.arms)))]
    return state.arms[int(np.argmax(state.means))]


def eg_update(state: EGState, arm: str, reward: float) -> EGState:
    """Fold one reward into an arm's running mean.

    >>> s = eg_update(EGState.initial(["a"]), "a", 1.0)
    >>> int(s.counts[0]), float(s.means[0])
    (1, 1.0)
    """
    index = state.index_of(arm)
    counts = state.counts.copy()
    means = state.means.copy()
    counts[index] += 1
    means[index] += (float(reward) - means[index]) / counts[index]
    return EGState(arms=state.arms, counts=_frozen(counts), means=_frozen(means))


# ------------------------------------------
# Beta-Bernoulli Thompson Sampling
# ------------------------------------------


def beta_sample(state: BetaState, rng: np.random.Generator) -> str:
    """
    Draw one value from every arm's Beta posterior and return the argmax.

    Raises:
        EmptyArmSet: If the state has no arms.
    """
    state._require_arms()
    theta = rng.beta(state.alpha, state.beta)
    return state.arms[int(np.argmax(theta))]


def beta_update(state: BetaState, arm: str, reward: float) -> BetaState:
    """
    Conjugate update: a success increments ``α``, a failure increments ``β``.

    Args:
        state: Current posterior.
        arm: Arm the reward belongs to.
        reward: 0 or 1.

    Returns:
        The updated posterior.

    Raises:
        UnknownArm: If the arm is not part of the state.
        NonBinaryReward: If the reward is not 0 or 1.
    """
    index = state.index_of(arm)
    if reward not in (0, 1):
        raise NonBinaryReward(reward)
    alpha = state.alpha.copy()
    beta = state.beta.copy()
    if reward == 1:
        alpha[index] += 1.0
    else:
        beta[index] += 1.0
    return type(state)(arms=state.arms, alpha=_frozen(alpha), beta=_frozen(beta))


# ------------------------------------------
# Exp3
# ------------------------------------------


def exp3_distribution(state: Exp3State, gamma: float) -> np.ndarray:
    """
    Mix the normalised weights with uniform exploration.

    ``p_a = (1 - γ) w_a / Σw + γ / K``

    Examples:
        >>> exp3_distribution(Exp3State(arms=("a", "b"), weights=np.array([3.0, 1.0])), 0.1)
        array([0.725, 0.275])

    Raises:
        EmptyArmSet: If the state has no arms.
    """
    state._require_arms()
    k = len(state.arms)
    return (1.0 - gamma) * state.weights / state.weights.sum() + gamma / k


def exp3_sample(state: Exp3State, gamma: float, rng: np.random.Generator) -> Tuple[str, float]:
    """Draw an arm from the Exp3 distribution.

    Returns:
        The arm and the probability it was drawn with; the trainer needs the
        latter for importance weighting.
    """
    probabilities = exp3_distribution(state, gamma)
    index = int(rng.choice(len(state.arms), p=probabilities))
    return state.arms[index], float(probabilities[index])


def exp3_update(
    state: Exp3State, arm: str, reward: float, p_arm: float, gamma: float
) -> Exp3State:
    """
    Importance-weighted exponential update.

    ``w_arm ← w_arm · exp(γ · (reward / p_arm) / K)``, after which all weights
    are rescaled so the largest equals 1.

    Args:
        state: Current weights.
        arm: Arm that was drawn.
        reward: Observed reward in [0, 1].
        p_arm: Probability the arm was drawn with.
        gamma: Exploration rate the distribution was built with.

    Returns:
        The updated weights.

    Raises:
        UnknownArm: If the arm is not part of the state.
        RewardOutOfRange: If the reward is outside [0, 1].
        ZeroProbability: If ``p_arm`` is not positive.
    """
    index = state.index_of(arm)
    if not (0.0 <= reward <= 1.0):
        raise RewardOutOfRange(reward)
    if not (p_arm > 0.0 and math.isfinite(p_arm)):
        raise ZeroProbability(f"Cannot importance-weight with probability {p_arm!r}")
    k = len(state.arms)
    weights = state.weights.copy()
    weights[index] *= math.exp(gamma * (reward / p_arm) / k)
    weights /= weights.max()
    # weights stay strictly positive
    np.maximum(weights, np.finfo(np.float64).tiny, out=weights)
    return Exp3State(arms=state.arms, weights=_frozen(weights))
