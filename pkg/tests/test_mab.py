"""Tests for `eazybandit.policies.mab` module."""

import math
from collections import Counter
from typing import List

import numpy as np
import pytest

from eazybandit.exceptions import (
    EmptyArmSet,
    NonBinaryReward,
    RewardOutOfRange,
    UnknownArm,
    ZeroProbability,
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
    exp3_sample,
    exp3_update,
)


def _eg(means: List[float]) -> EGState:
    return EGState(
        arms=tuple(f"a{i}" for i in range(len(means))),
        counts=np.ones(len(means), dtype=np.int64),
        means=np.asarray(means, dtype=np.float64),
    )


# ------------------------------------------
# Test cases for eg_sample() and eg_update()
# ------------------------------------------


def test_eg_sample_greedy() -> None:
    """Test pure exploitation picks the best mean."""
    assert eg_sample(_eg([0.1, 0.5, 0.2]), 0.0, np.random.default_rng(0)) == "a1"


def test_eg_sample_breaks_ties_by_index() -> None:
    """Test that ties go to the smallest index."""
    assert eg_sample(_eg([0.3, 0.3]), 0.0, np.random.default_rng(0)) == "a0"


def test_eg_sample_uniform_exploration() -> None:
    """Test epsilon 1 picks arms uniformly."""
    rng = np.random.default_rng(1)
    state = _eg([0.9, 0.1, 0.5])
    counts = Counter(eg_sample(state, 1.0, rng) for _ in range(100_000))
    for arm in state.arms:
        assert counts[arm] / 100_000 == pytest.approx(1 / 3, abs=0.02)


def test_eg_sample_without_arms() -> None:
    """Test that an empty state cannot be sampled."""
    with pytest.raises(EmptyArmSet):
        eg_sample(EGState.initial([]), 0.1, np.random.default_rng(0))


def test_eg_update_first_observation() -> None:
    """Test the first reward becomes the mean."""
    state = eg_update(EGState.initial(["a", "b"]), "a", 1.0)
    assert state.counts.tolist() == [1, 0]
    assert state.means.tolist() == [1.0, 0.0]


def test_eg_update_running_mean() -> None:
    """Test the running mean equals the batch mean."""
    state = EGState.initial(["a"])
    for reward in (1.0, 0.0, 1.0):
        state = eg_update(state, "a", reward)
    assert state.means[0] == pytest.approx(2 / 3, abs=1e-15)


def test_eg_update_fixed_point() -> None:
    """Test that a reward equal to the mean leaves it unchanged."""
    state = EGState(arms=("a",), counts=np.array([10**6]), means=np.array([0.3]))
    assert eg_update(state, "a", 0.3).means[0] == 0.3


def test_eg_update_leaves_input_untouched() -> None:
    """Test that states are immutable values."""
    state = EGState.initial(["a"])
    eg_update(state, "a", 1.0)
    assert state.counts.tolist() == [0]
    with pytest.raises(ValueError):
        state.means[0] = 1.0


def test_eg_update_unknown_arm() -> None:
    """Test rewards for arms outside the state."""
    with pytest.raises(UnknownArm):
        eg_update(EGState.initial(["a"]), "z", 1.0)


# ------------------------------------------
# Test cases for beta_sample() and beta_update()
# ------------------------------------------


def test_beta_sample_exchangeable_priors() -> None:
    """Test equal posteriors are chosen equally often."""
    rng = np.random.default_rng(2)
    state = BetaState.initial(["a", "b"])
    counts = Counter(beta_sample(state, rng) for _ in range(100_000))
    assert counts["a"] / 100_000 == pytest.approx(0.5, abs=0.02)


def test_beta_sample_near_degenerate() -> None:
    """Test a dominant posterior is almost always chosen."""
    rng = np.random.default_rng(3)
    state = BetaState(arms=("a", "b"), alpha=np.array([1000.0, 1.0]), beta=np.array([1.0, 1000.0]))
    counts = Counter(beta_sample(state, rng) for _ in range(10_000))
    assert counts["a"] / 10_000 > 0.999


def test_beta_sample_single_arm() -> None:
    """Test a single arm is always chosen."""
    assert beta_sample(BetaState.initial(["only"]), np.random.default_rng(0)) == "only"


@pytest.mark.parametrize("reward,alpha,beta", [(1, 2.0, 1.0), (0, 1.0, 2.0)])
def test_beta_update(reward: int, alpha: float, beta: float) -> None:
    """Test the conjugate update."""
    state = beta_update(BetaState.initial(["a"]), "a", reward)
    assert (state.alpha[0], state.beta[0]) == (alpha, beta)


def test_beta_update_counts() -> None:
    """Test 30 successes and 70 failures from a uniform prior."""
    state = BetaState.initial(["a"])
    for reward in [1] * 30 + [0] * 70:
        state = beta_update(state, "a", reward)
    assert (state.alpha[0], state.beta[0]) == (31.0, 71.0)
    assert state.posterior_means[0] == pytest.approx(31 / 102)


def test_beta_update_non_binary() -> None:
    """Test that fractional rewards are rejected."""
    with pytest.raises(NonBinaryReward):
        beta_update(BetaState.initial(["a"]), "a", 0.5)


# ------------------------------------------
# Test cases for Exp3
# ------------------------------------------


@pytest.mark.parametrize(
    "weights,gamma,expected",
    [
        ([1.0, 1.0], 0.1, [0.5, 0.5]),
        ([3.0, 1.0], 0.1, [0.725, 0.275]),
        ([5.0, 1.0, 0.1, 2.0], 1.0, [0.25, 0.25, 0.25, 0.25]),
    ],
)
def test_exp3_distribution(weights: List[float], gamma: float, expected: List[float]) -> None:
    """Test the mixture of normalised weights and uniform exploration."""
    state = Exp3State(arms=tuple(str(i) for i in range(len(weights))), weights=np.array(weights))
    assert exp3_distribution(state, gamma) == pytest.approx(expected)


def test_exp3_distribution_fuzzed() -> None:
    """Test that fuzzed distributions are valid."""
    rng = np.random.default_rng(4)
    for _ in range(10_000):
        k = int(rng.integers(1, 20))
        weights = np.exp(rng.uniform(-30.0, 0.0, size=k))
        state = Exp3State(arms=tuple(str(i) for i in range(k)), weights=weights)
        p = exp3_distribution(state, float(rng.uniform(1e-3, 1.0)))
        assert np.all(p >= 0.0)
        assert abs(p.sum() - 1.0) <= 1e-12


def test_exp3_update_zero_reward() -> None:
    """Test that a zero reward is the identity."""
    state = exp3_update(Exp3State.initial(["a", "b"]), "a", 0.0, 0.5, 0.1)
    assert state.weights.tolist() == [1.0, 1.0]


def test_exp3_update_rescales() -> None:
    """Test the importance-weighted update and the rescale to a maximum of 1."""
    state = exp3_update(Exp3State.initial(["a", "b"]), "a", 1.0, 0.5, 0.1)
    assert state.weights == pytest.approx([1.0, math.exp(-0.1)])


def test_exp3_update_rejects_bad_input() -> None:
    """Test out-of-range rewards and zero probabilities."""
    state = Exp3State.initial(["a", "b"])
    with pytest.raises(RewardOutOfRange):
        exp3_update(state, "a", 1.5, 0.5, 0.1)
    with pytest.raises(ZeroProbability):
        exp3_update(state, "a", 1.0, 0.0, 0.1)


def test_exp3_weights_stay_positive() -> None:
    """Test that long runs on one arm never zero the others."""
    state = Exp3State.initial(["a", "b"])
    for _ in range(2000):
        state = exp3_update(state, "a", 1.0, 0.05, 1.0)
    assert np.all(state.weights > 0.0)
    assert state.weights[0] == 1.0


def test_exp3_sample_reports_probability() -> None:
    """Test that the drawn arm's probability is returned."""
    state = Exp3State(arms=("a", "b"), weights=np.array([3.0, 1.0]))
    arm, p = exp3_sample(state, 0.1, np.random.default_rng(5))
    assert p == pytest.approx({"a": 0.725, "b": 0.275}[arm])
