"""Linear contextual policies over disjoint per-arm models.

Two posteriors are supported: Recursive Least Squares (Gaussian, full
covariance, unit observation noise) for continuous rewards and Bayesian
Logistic Regression with a diagonal Laplace precision for binary rewards.
Action selection on top of them is Thompson sampling, epsilon greedy or
Inverse Gap Weighting.
"""

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from eazybandit.exceptions import (
    DimensionMismatch,
    EmptyBatch,
    NoConvergence,
    NonBinaryLabel,
    NonFiniteInput,
    NonFiniteScore,
)
from eazybandit.policies.mab import ArmIndexed, _frozen

#: Gradient norm at which the Laplace mode search stops.
MODE_TOLERANCE = 1e-6

#: Trust-region iterations after which the Laplace mode search gives up.
MODE_MAX_ITERATIONS = 500


@dataclass(frozen=True, eq=False)
class RLSState(ArmIndexed):
    """Per-arm Gaussian posterior: coefficient means ``(K, d)`` and covariances ``(K, d, d)``."""

    means: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    covariances: np.ndarray = field(default_factory=lambda: np.zeros((0, 0, 0)))

    @classmethod
    def initial(cls, arms: Sequence[str], dim: int, prior_variance: float) -> "RLSState":
        """Zero means and ``prior_variance · I`` covariances."""
        covariances = np.tile(np.eye(dim) * prior_variance, (len(arms), 1, 1))
        return cls(
            arms=tuple(arms),
            means=_frozen(np.zeros((len(arms), dim))),
            covariances=_frozen(covariances),
        )

    @property
    def dim(self) -> int:
        """Context dimension."""
        return int(self.means.shape[1])


@dataclass(frozen=True, eq=False)
class BLRState(ArmIndexed):
    """Per-arm diagonal Gaussian over logistic weights: means and precisions, both ``(K, d)``."""

    means: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    precisions: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @classmethod
    def initial(cls, arms: Sequence[str], dim: int, prior_variance: float) -> "BLRState":
        """Zero means and precisions ``1 / prior_variance``."""
        return cls(
            arms=tuple(arms),
            means=_frozen(np.zeros((len(arms), dim))),
            precisions=_frozen(np.full((len(arms), dim), 1.0 / prior_variance)),
        )

    @property
    def dim(self) -> int:
        """Context dimension."""
        return int(self.means.shape[1])


LinearState = Union[RLSState, BLRState]


def _check_dim(state: LinearState, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != state.dim:
        raise DimensionMismatch(state.dim, int(x.size) if x.ndim == 1 else -1)
    return x


# ------------------------------------------
# Recursive Least Squares
# ------------------------------------------


def rls_predict(state: RLSState, arm: str, x: np.ndarray) -> float:
    """Posterior mean reward ``m_aᵀx``.

    >>> s = RLSState(arms=("a",), means=np.array([[0.5, 1.0]]), covariances=np.eye(2)[None])
    >>> rls_predict(s, "a", np.array([1.0, 2.0]))
    2.5
    """
    index = state.index_of(arm)
    x = _check_dim(state, x)
    return float(state.means[index] @ x)


def rls_update(state: RLSState, arm: str, x: np.ndarray, y: float) -> RLSState:
    """
    Rank-one Recursive Least Squares update with unit observation noise.

    ``k = P x / (1 + xᵀ P x)``, ``m ← m + k (y − mᵀx)``, ``P ← P − k xᵀ P``,
    then ``P`` is re-symmetrised as ``(P + Pᵀ) / 2``.

    Args:
        state: Current posterior.
        arm: Arm the observation belongs to.
        x: Encoded context.
        y: Observed reward.

    Returns:
        The updated posterior.

    Raises:
        UnknownArm: If the arm is not part of the state.
        DimensionMismatch: If ``x`` has the wrong dimension.
        NonFiniteInput: If ``x`` or ``y`` is not finite.
    """
    index = state.index_of(arm)
    x = _check_dim(state, x)
    if not (math.isfinite(y) and np.all(np.isfinite(x))):
        raise NonFiniteInput("RLS observation must be finite")
    mean = state.means[index]
    cov = state.covariances[index]
    px = cov @ x
    gain = px / (1.0 + x @ px)
    new_mean = mean + gain * (y - mean @ x)
    new_cov = cov - np.outer(gain, px)
    new_cov = (new_cov + new_cov.T) / 2.0

    means = state.means.copy()
    covariances = state.covariances.copy()
    means[index] = new_mean
    covariances[index] = new_cov
    return RLSState(arms=state.arms, means=_frozen(means), covariances=_frozen(covariances))


# ------------------------------------------
# Bayesian Logistic Regression (diagonal Laplace)
# ------------------------------------------


def laplace_objective(
    w: np.ndarray, mean: np.ndarray, precision: np.ndarray, xs: np.ndarray, signs: np.ndarray
) -> float:
    """Negative log posterior ``Σ q_j/2 (w_j − m_j)² + Σ log(1 + exp(−y_i wᵀx_i))``.

    ``signs`` holds labels mapped to {−1, +1}.
    """
    diff = w - mean
    prior = 0.5 * np.sum(precision * diff * diff)
    return float(prior + np.sum(np.logaddexp(0.0, -signs * (xs @ w))))


def laplace_gradient(
    w: np.ndarray, mean: np.ndarray, precision: np.ndarray, xs: np.ndarray, signs: np.ndarray
) -> np.ndarray:
    """Gradient of :func:`laplace_objective`."""
    margins = signs * (xs @ w)
    return precision * (w - mean) - xs.T @ (signs * expit(-margins))


def laplace_hessian(
    w: np.ndarray, mean: np.ndarray, precision: np.ndarray, xs: np.ndarray, signs: np.ndarray
) -> np.ndarray:
    """Hessian of :func:`laplace_objective`."""
    probs = expit(xs @ w)
    hessian = (xs.T * (probs * (1.0 - probs))) @ xs
    hessian[np.diag_indices_from(hessian)] += precision
    return hessian


def _laplace_mode(
    mean: np.ndarray, precision: np.ndarray, xs: np.ndarray, signs: np.ndarray
) -> np.ndarray:
    result = minimize(
        laplace_objective,
        mean.copy(),
        args=(mean, precision, xs, signs),
        jac=laplace_gradient,
        hess=laplace_hessian,
        method="trust-exact",
        options={"gtol": MODE_TOLERANCE, "maxiter": MODE_MAX_ITERATIONS},
    )
    w = np.asarray(result.x, dtype=np.float64)
    if np.linalg.norm(laplace_gradient(w, mean, precision, xs, signs)) > MODE_TOLERANCE:
        raise NoConvergence(f"Laplace mode search did not converge: {result.message}")
    return w


def blr_update(
    state: BLRState, arm: str, batch: Sequence[Tuple[np.ndarray, float]]
) -> BLRState:
    """
    Diagonal Laplace update of one arm's logistic posterior from a batch.

    The mode ``w*`` of the regularised logistic loss around the current mean is
    found by a trust-region Newton solve to a gradient norm of ``1e-6``; then ``m ← w*`` and
    ``q_j ← q_j + Σ_i x_ij² p_i (1 − p_i)`` with ``p_i = σ(w*ᵀx_i)``.

    Args:
        state: Current posterior.
        arm: Arm every observation in the batch belongs to.
        batch: ``(x, y)`` pairs with ``y`` in {0, 1}.

    Returns:
        The updated posterior.

    Raises:
        UnknownArm: If the arm is not part of the state.
        EmptyBatch: If the batch is empty.
        NonBinaryLabel: If a label is not 0 or 1.
        DimensionMismatch: If a context has the wrong dimension.
        NoConvergence: If the mode search exceeds its iteration budget.
    """
    index = state.index_of(arm)
    if len(batch) == 0:
        raise EmptyBatch("BLR update needs at least one observation")
    xs = np.vstack([_check_dim(state, x) for x, _ in batch])
    labels = [y for _, y in batch]
    for label in labels:
        if label not in (0, 1):
            raise NonBinaryLabel(label)
    if not np.all(np.isfinite(xs)):
        raise NonFiniteInput("BLR contexts must be finite")
    signs = np.where(np.asarray(labels, dtype=np.float64) == 1.0, 1.0, -1.0)

    mean = state.means[index]
    precision = state.precisions[index]
    mode = _laplace_mode(mean, precision, xs, signs)
    probs = expit(xs @ mode)
    new_precision = precision + (probs * (1.0 - probs)) @ (xs * xs)

    means = state.means.copy()
    precisions = state.precisions.copy()
    means[index] = mode
    precisions[index] = new_precision
    return BLRState(arms=state.arms, means=_frozen(means), precisions=_frozen(precisions))


def blr_predict_proba(state: BLRState, arm: str, x: np.ndarray) -> float:
    """Posterior-mean click probability ``σ(m_aᵀx)``.

    >>> s = BLRState.initial(["a"], 2, 1.0)
    >>> blr_predict_proba(s, "a", np.array([1.0, 3.0]))
    0.5
    """
    index = state.index_of(arm)
    x = _check_dim(state, x)
    return float(expit(state.means[index] @ x))


# ------------------------------------------
# Action selection
# ------------------------------------------


def mean_scores(state: LinearState, x: np.ndarray) -> np.ndarray:
    """Posterior-mean reward of every arm: ``mᵀx`` for RLS, ``σ(mᵀx)`` for BLR."""
    x = _check_dim(state, x)
    logits = state.means @ x
    return expit(logits) if isinstance(state, BLRState) else logits


def sampled_scores(state: LinearState, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    One posterior draw of every arm's reward at ``x``.

    Drawing ``w̃_a`` from the Gaussian posterior and projecting onto ``x`` is
    done as a single normal draw of ``w̃_aᵀx`` with mean ``m_aᵀx`` and variance
    ``xᵀ P_a x`` (RLS) or ``Σ_j x_j² / q_aj`` (BLR), which has the same law.
    BLR draws are mapped through the sigmoid.
    """
    x = _check_dim(state, x)
    centres = state.means @ x
    if isinstance(state, RLSState):
        variances = np.einsum("kij,i,j->k", state.covariances, x, x)
    else:
        variances = (x * x) @ (1.0 / state.precisions).T
    draws = centres + np.sqrt(np.maximum(variances, 0.0)) * rng.standard_normal(len(state.arms))
    return expit(draws) if isinstance(state, BLRState) else draws


def linear_ts_sample(state: LinearState, x: np.ndarray, rng: np.random.Generator) -> str:
    """Thompson sampling: the arm with the largest posterior draw, ties to the smallest index.

    Raises:
        DimensionMismatch: If ``x`` has the wrong dimension.
    """
    state._require_arms()
    return state.arms[int(np.argmax(sampled_scores(state, x, rng)))]


def igw_gamma(gamma0: float, t: int) -> float:
    """Exploration schedule ``γ_t = γ0 √(t + 1)`` over update-batch count ``t``."""
    return gamma0 * math.sqrt(t + 1)


def igw_distribution(scores: np.ndarray, gamma_t: float) -> np.ndarray:
    """
    Inverse Gap Weighting over estimated rewards.

    With ``b`` the best arm (smallest index on ties), every other arm gets
    ``1 / (K + γ_t (score_b − score_a))`` and ``b`` takes the remainder.

    Examples:
        >>> igw_distribution(np.array([1.0, 0.5]), 10.0).round(6).tolist()
        [0.857143, 0.142857]

    Raises:
        NonFiniteScore: If a score is NaN or infinite.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise NonFiniteScore("IGW scores must be finite")
    k = scores.shape[0]
    best = int(np.argmax(scores))
    probabilities = 1.0 / (k + gamma_t * (scores[best] - scores))
    probabilities[best] = 0.0
    probabilities[best] = 1.0 - probabilities.sum()
    return probabilities


def sample_weights(state: LinearState, rng: np.random.Generator) -> np.ndarray:
    """
    One full posterior draw of every arm's coefficient vector, shape ``(K, d)``.

    Used where a single draw must score many assignments, as in greedy search
    over slotted spaces.
    """
    noise = rng.standard_normal(state.means.shape)
    if isinstance(state, BLRState):
        return state.means + noise / np.sqrt(state.precisions)
    try:
        factors = np.linalg.cholesky(state.covariances)
    except np.linalg.LinAlgError:
        # numerically semi-definite covariance after many updates
        values, vectors = np.linalg.eigh(state.covariances)
        factors = vectors * np.sqrt(np.clip(values, 0.0, None))[:, None, :]
    return state.means + np.einsum("kij,kj->ki", factors, noise)
