"""Tests for `eazybandit.policies.linear` module."""

from collections import Counter
from typing import Any, Dict, List, Tuple

import numpy as np
import pytest
from scipy.optimize import OptimizeResult
from scipy.special import expit

from eazybandit.exceptions import (
    DimensionMismatch,
    EmptyBatch,
    NoConvergence,
    NonBinaryLabel,
    NonFiniteScore,
)
from eazybandit.policies import linear
from eazybandit.policies.linear import (
    MODE_MAX_ITERATIONS,
    MODE_TOLERANCE,
    BLRState,
    RLSState,
    blr_predict_proba,
    blr_update,
    igw_distribution,
    igw_gamma,
    laplace_gradient,
    laplace_objective,
    linear_ts_sample,
    mean_scores,
    rls_predict,
    rls_update,
)

# ------------------------------------------
# Test cases for Recursive Least Squares
# ------------------------------------------


def test_rls_predict_fresh_state() -> None:
    """Test that a fresh posterior predicts zero."""
    state = RLSState.initial(["a"], 3, 1.0)
    assert rls_predict(state, "a", np.array([1.0, -2.0, 5.0])) == 0.0


def test_rls_single_update() -> None:
    """Test the recursion by hand in one dimension."""
    state = rls_update(RLSState.initial(["a"], 1, 1.0), "a", np.array([1.0]), 1.0)
    assert state.means[0, 0] == pytest.approx(0.5)
    assert state.covariances[0, 0, 0] == pytest.approx(0.5)
    assert rls_predict(state, "a", np.array([1.0])) == pytest.approx(0.5)


def test_rls_zero_context_is_uninformative() -> None:
    """Test that a zero context leaves the posterior unchanged."""
    state = RLSState.initial(["a", "b"], 2, 2.0)
    updated = rls_update(state, "b", np.zeros(2), 7.0)
    assert np.array_equal(updated.means, state.means)
    assert np.array_equal(updated.covariances, state.covariances)


def test_rls_matches_batch_ridge() -> None:
    """Test sequential updates against the dense ridge solution."""
    rng = np.random.default_rng(10)
    for _ in range(100):
        d = int(rng.integers(1, 21))
        n = int(rng.integers(1, 301))
        xs = rng.normal(size=(n, d))
        ys = xs @ rng.normal(size=d) + 0.1 * rng.normal(size=n)
        state = RLSState.initial(["a"], d, 1.0)
        for x, y in zip(xs, ys):
            state = rls_update(state, "a", x, float(y))
        precision = xs.T @ xs + np.eye(d)
        assert np.max(np.abs(state.means[0] - np.linalg.solve(precision, xs.T @ ys))) < 1e-8
        assert np.max(np.abs(state.covariances[0] - np.linalg.inv(precision))) < 1e-8


def test_rls_dimension_mismatch() -> None:
    """Test contexts of the wrong dimension."""
    with pytest.raises(DimensionMismatch) as e:
        rls_update(RLSState.initial(["a"], 2, 1.0), "a", np.ones(3), 1.0)
    assert (e.value.expected, e.value.actual) == (2, 3)


# ------------------------------------------
# Test cases for Bayesian Logistic Regression
# ------------------------------------------


def _problem(
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    d = int(rng.integers(1, 8))
    n = int(rng.integers(1, 50))
    xs = rng.normal(size=(n, d))
    signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    mean = rng.normal(size=d)
    precision = rng.uniform(0.5, 3.0, size=d)
    return mean, precision, xs, signs


def test_laplace_gradient_matches_finite_differences() -> None:
    """Test the analytic gradient against central differences."""
    rng = np.random.default_rng(11)
    h = 1e-5
    for _ in range(20):
        mean, precision, xs, signs = _problem(rng)
        for _ in range(10):
            w = rng.normal(scale=2.0, size=mean.size)
            numeric = np.array(
                [
                    (
                        laplace_objective(w + h * e, mean, precision, xs, signs)
                        - laplace_objective(w - h * e, mean, precision, xs, signs)
                    )
                    / (2 * h)
                    for e in np.eye(mean.size)
                ]
            )
            analytic = laplace_gradient(w, mean, precision, xs, signs)
            scale = max(np.linalg.norm(analytic), 1.0)
            assert np.linalg.norm(numeric - analytic) / scale < 1e-4


def test_blr_update_finds_the_mode() -> None:
    """Test that updated means are stationary points of the objective."""
    rng = np.random.default_rng(12)
    for _ in range(20):
        mean, precision, xs, signs = _problem(rng)
        state = BLRState(arms=("a",), means=mean[None, :], precisions=precision[None, :])
        batch = [(x, 1.0 if s > 0 else 0.0) for x, s in zip(xs, signs)]
        updated = blr_update(state, "a", batch)
        grad = laplace_gradient(updated.means[0], mean, precision, xs, signs)
        assert np.linalg.norm(grad) <= MODE_TOLERANCE


def test_blr_single_observation() -> None:
    """Test one click from a standard prior: the mode solves w = σ(−w)."""
    state = blr_update(BLRState.initial(["a"], 1, 1.0), "a", [(np.array([1.0]), 1.0)])
    w = state.means[0, 0]
    assert w == pytest.approx(0.4011, abs=1e-4)
    assert w == pytest.approx(expit(-w), abs=1e-6)
    p = expit(w)
    assert state.precisions[0, 0] == pytest.approx(1.0 + p * (1.0 - p))


def test_blr_mode_search_gives_up(monkeypatch: Any) -> None:
    """Test that a stalled mode search raises after its iteration budget."""
    calls: List[Dict[str, Any]] = []

    def stalled(fun: Any, x0: np.ndarray, **kwargs: Any) -> OptimizeResult:
        calls.append(kwargs["options"])
        return OptimizeResult(x=x0, message="Maximum number of iterations has been exceeded.")

    monkeypatch.setattr(linear, "minimize", stalled)
    with pytest.raises(NoConvergence, match="Maximum number of iterations"):
        blr_update(BLRState.initial(["a"], 1, 1.0), "a", [(np.array([1.0]), 1.0)])
    assert MODE_MAX_ITERATIONS == 500
    assert calls == [{"gtol": MODE_TOLERANCE, "maxiter": 500}]


def test_blr_symmetric_batch() -> None:
    """Test that a click and a skip on the same context cancel out."""
    x = np.array([1.0, 0.5])
    state = blr_update(BLRState.initial(["a"], 2, 1.0), "a", [(x, 1.0), (x, 0.0)])
    assert np.allclose(state.means[0], 0.0, atol=1e-9)
    assert np.all(state.precisions[0] > 1.0)


def test_blr_update_rejects_bad_batches() -> None:
    """Test empty batches and non-binary labels."""
    state = BLRState.initial(["a"], 1, 1.0)
    with pytest.raises(EmptyBatch):
        blr_update(state, "a", [])
    with pytest.raises(NonBinaryLabel):
        blr_update(state, "a", [(np.array([1.0]), 0.5)])


def test_blr_predict_proba() -> None:
    """Test the posterior-mean click probability."""
    assert blr_predict_proba(BLRState.initial(["a"], 3, 1.0), "a", np.ones(3)) == 0.5
    state = BLRState(arms=("a",), means=np.array([[10.0]]), precisions=np.array([[1.0]]))
    assert blr_predict_proba(state, "a", np.array([1.0])) == pytest.approx(0.9999546, abs=1e-7)
    assert blr_predict_proba(state, "a", np.array([1.0])) + blr_predict_proba(
        state, "a", np.array([-1.0])
    ) == pytest.approx(1.0)


# ------------------------------------------
# Test cases for Thompson sampling
# ------------------------------------------


def test_linear_ts_identical_posteriors() -> None:
    """Test exchangeable arms are drawn equally often."""
    rng = np.random.default_rng(13)
    state = RLSState.initial(["a", "b"], 2, 1.0)
    x = np.array([1.0, 0.5])
    counts = Counter(linear_ts_sample(state, x, rng) for _ in range(20_000))
    assert counts["a"] / 20_000 == pytest.approx(0.5, abs=0.02)


def test_linear_ts_confident_posteriors() -> None:
    """Test a clearly better, nearly certain arm is almost always drawn."""
    rng = np.random.default_rng(14)
    state = RLSState(
        arms=("a", "b"),
        means=np.array([[10.0], [0.0]]),
        covariances=np.full((2, 1, 1), 1e-6),
    )
    counts = Counter(linear_ts_sample(state, np.array([1.0]), rng) for _ in range(10_000))
    assert counts["a"] / 10_000 > 0.999


def test_linear_ts_single_arm() -> None:
    """Test a single arm is always drawn."""
    state = BLRState.initial(["only"], 2, 1.0)
    assert linear_ts_sample(state, np.ones(2), np.random.default_rng(0)) == "only"


def test_mean_scores_blr_are_probabilities() -> None:
    """Test that BLR scores go through the sigmoid."""
    state = BLRState(arms=("a", "b"), means=np.array([[0.0], [2.0]]), precisions=np.ones((2, 1)))
    assert mean_scores(state, np.array([1.0])) == pytest.approx([0.5, expit(2.0)])


# ------------------------------------------
# Test cases for Inverse Gap Weighting
# ------------------------------------------


@pytest.mark.parametrize(
    "scores,gamma,expected",
    [
        ([0.3, 0.3, 0.3, 0.3], 5.0, [0.25, 0.25, 0.25, 0.25]),
        ([1.0, 0.5], 10.0, [6 / 7, 1 / 7]),
        ([0.2], 3.0, [1.0]),
    ],
)
def test_igw_distribution(scores: List[float], gamma: float, expected: List[float]) -> None:
    """Test the inverse gap weights."""
    assert igw_distribution(np.array(scores), gamma) == pytest.approx(expected)


def test_igw_distribution_fuzzed() -> None:
    """Test that fuzzed distributions are valid and modal at the best arm."""
    rng = np.random.default_rng(15)
    for _ in range(10_000):
        k = int(rng.integers(1, 30))
        scores = rng.normal(scale=float(rng.uniform(0.01, 10.0)), size=k)
        gamma = igw_gamma(float(rng.uniform(0.01, 10.0)), int(rng.integers(0, 1000)))
        p = igw_distribution(scores, gamma)
        assert np.all(p >= 0.0)
        assert abs(p.sum() - 1.0) <= 1e-12
        assert p[int(np.argmax(scores))] == p.max()


def test_igw_gamma_schedule() -> None:
    """Test the square-root growth of the exploration schedule."""
    assert igw_gamma(2.0, 0) == 2.0
    assert igw_gamma(2.0, 3) == pytest.approx(4.0)


def test_igw_rejects_non_finite_scores() -> None:
    """Test NaN scores."""
    with pytest.raises(NonFiniteScore):
        igw_distribution(np.array([0.1, float("nan")]), 1.0)
