"""Structured decisions: cascade rankings, Gini scalarisation and greedy slot search."""

import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from eazybandit.core import SlottedArms
from eazybandit.exceptions import (
    DimensionMismatch,
    KTooLarge,
    LengthMismatch,
    NonFiniteScore,
    PositionOutOfRange,
)
from eazybandit.policies.linear import LinearState, sampled_scores
from eazybandit.policies.mab import BetaState, _frozen

Assignment = Tuple[int, ...]


# ------------------------------------------
# Cascading bandits
# ------------------------------------------


@dataclass(frozen=True, eq=False)
class CascadeState(BetaState):
    """Per-item Beta posterior over attraction probability."""

    @classmethod
    def initial(  # type: ignore[override]
        cls, arms: Sequence[str], prior: Tuple[float, float] = (1.0, 1.0)
    ) -> "CascadeState":
        """Fresh state under a ``Beta(prior)`` prior on every item."""
        return cls(
            arms=tuple(arms),
            alpha=_frozen(np.full(len(arms), float(prior[0]))),
            beta=_frozen(np.full(len(arms), float(prior[1]))),
        )


def _top_k(state: CascadeState, values: np.ndarray, k: int) -> List[str]:
    if k > len(state.arms):
        raise KTooLarge(f"Cannot rank {k} of {len(state.arms)} items")
    order = np.argsort(-values, kind="stable")[:k]
    return [state.arms[int(i)] for i in order]


def cascade_sample(state: CascadeState, k: int, rng: np.random.Generator) -> List[str]:
    """
    Rank ``k`` items by one Thompson draw per item.

    Args:
        state: Item posteriors.
        k: Ranking length.
        rng: Seeded random source.

    Returns:
        The ``k`` items with the largest sampled attraction, best first; ties go
        to the smaller item index.

    Raises:
        KTooLarge: If ``k`` exceeds the number of items.
    """
    state._require_arms()
    theta = rng.beta(state.alpha, state.beta)
    return _top_k(state, theta, k)


def cascade_exploit(state: CascadeState, k: int) -> List[str]:
    """Rank ``k`` items by posterior mean attraction."""
    state._require_arms()
    return _top_k(state, state.posterior_means, k)


def cascade_update(
    state: CascadeState, shown: Sequence[str], click_position: Optional[int]
) -> CascadeState:
    """
    Cascade-model credit assignment.

    Items above the click were examined and skipped (``β += 1``), the clicked
    item gets ``α += 1`` and items below it were never examined. Without a
    click every shown item counts as skipped.

    Examples:
        >>> s = cascade_update(CascadeState.initial(["a", "b", "c"]), ["a", "b", "c"], 1)
        >>> s.alpha.tolist(), s.beta.tolist()
        ([1.0, 2.0, 1.0], [2.0, 1.0, 1.0])

    Raises:
        UnknownArm: If a shown item is not part of the state.
        PositionOutOfRange: If the click lies outside the shown ranking.
    """
    indices = [state.index_of(item) for item in shown]
    if click_position is not None and not 0 <= click_position < len(shown):
        raise PositionOutOfRange(
            f"Click position {click_position} outside a ranking of {len(shown)} items"
        )
    alpha = state.alpha.copy()
    beta = state.beta.copy()
    examined = indices if click_position is None else indices[:click_position]
    for index in examined:
        beta[index] += 1.0
    if click_position is not None:
        alpha[indices[click_position]] += 1.0
    return CascadeState(arms=state.arms, alpha=_frozen(alpha), beta=_frozen(beta))


# ------------------------------------------
# Generalized Gini Index
# ------------------------------------------


@dataclass(frozen=True, eq=False)
class GGIWeights:
    """Positive nonincreasing objective weights summing to one."""

    values: np.ndarray

    @classmethod
    def of(cls, weights: Sequence[float]) -> "GGIWeights":
        """
        Validate and normalise raw weights.

        Raises:
            ValueError: If the weights are empty, not strictly positive or increase somewhere.
        """
        array = np.asarray(weights, dtype=np.float64)
        if array.ndim != 1 or array.size == 0:
            raise ValueError("GGI weights must be a nonempty vector")
        if not np.all(np.isfinite(array)) or np.any(array <= 0.0):
            raise ValueError("GGI weights must be strictly positive")
        if np.any(np.diff(array) > 0.0):
            raise ValueError("GGI weights must be nonincreasing")
        return cls(values=_frozen(array / array.sum()))

    def __len__(self) -> int:
        return int(self.values.size)


def ggi_scalarize(rewards: Sequence[float], weights: Union[GGIWeights, Sequence[float]]) -> float:
    """
    Generalized Gini aggregation of an objective vector.

    Rewards are sorted ascending so the largest weight lands on the worst objective.

    Examples:
        >>> round(ggi_scalarize([0.8, 0.2], GGIWeights.of([2.0, 1.0])), 12)
        0.4

    Raises:
        LengthMismatch: If rewards and weights differ in length.
    """
    if isinstance(weights, GGIWeights):
        w = weights.values
    else:
        w = np.asarray(weights, dtype=np.float64)
    r = np.asarray(rewards, dtype=np.float64)
    if r.shape != w.shape:
        raise LengthMismatch(f"{r.size} rewards against {w.size} weights")
    return float(np.sort(r) @ w)


def ggi_ts_sample(
    states: Sequence[LinearState],
    x: np.ndarray,
    weights: GGIWeights,
    rng: np.random.Generator,
) -> str:
    """
    Multi-objective Thompson sampling.

    Every arm gets one independent posterior draw per objective; the draws are
    scalarised with :func:`ggi_scalarize` and the best arm wins, ties to the
    smallest index.

    Raises:
        LengthMismatch: If the objectives and weights differ in number, or the
            objectives do not share an arm set.
        DimensionMismatch: If the objectives differ in context dimension or ``x`` does not match.
    """
    if len(states) != len(weights):
        raise LengthMismatch(f"{len(states)} objectives against {len(weights)} weights")
    first = states[0]
    first._require_arms()
    for state in states[1:]:
        if state.arms != first.arms:
            raise LengthMismatch("Objectives must share one arm set")
        if state.dim != first.dim:
            raise DimensionMismatch(first.dim, state.dim)
    draws = np.vstack([sampled_scores(state, x, rng) for state in states])
    scalarised = np.sort(draws, axis=0).T @ weights.values
    return first.arms[int(np.argmax(scalarised))]


# ------------------------------------------
# Greedy slot search
# ------------------------------------------


@dataclass(frozen=True)
class GreedySearchBudget:
    """Bounds on one greedy search: passes per run, wall-clock deadline and random restarts."""

    max_passes: int
    deadline_ms: float
    restarts: int = 0

    def __post_init__(self) -> None:
        if self.max_passes < 1 or not self.deadline_ms > 0.0 or self.restarts < 0:
            raise ValueError(f"Invalid greedy search budget: {self}")


@dataclass(frozen=True)
class GreedyResult:
    """Outcome of :func:`greedy_search`.

    ``deadline_before_first_pass`` flags a search that never finished a full
    pass; its arm is then the initial assignment.
    """

    arm: str
    assignment: Assignment
    score: float
    passes: int
    evaluations: int
    converged: bool
    deadline_before_first_pass: bool = False


class _Deadline:
    def __init__(self, budget_ms: float) -> None:
        self._end = time.perf_counter() + budget_ms / 1000.0

    @property
    def expired(self) -> bool:
        return time.perf_counter() >= self._end


def _ascend(
    score: Callable[[Assignment], float],
    space: SlottedArms,
    start: Assignment,
    max_passes: int,
    deadline: _Deadline,
) -> Tuple[Assignment, Optional[float], int, int, bool, bool]:
    """One coordinate-ascent run.

    Returns:
        Assignment, its score, passes, evaluations, converged flag and timeout flag.
    """
    current = list(start)
    current_score: Optional[float] = None
    evaluations = 0
    passes = 0
    for _ in range(max_passes):
        changed = False
        for slot, count in enumerate(space.option_counts):
            if deadline.expired:
                return tuple(current), current_score, passes, evaluations, False, True
            best_option, best_value = current[slot], None
            for option in range(count):
                candidate = current.copy()
                candidate[slot] = option
                value = float(score(tuple(candidate)))
                evaluations += 1
                if not np.isfinite(value):
                    raise NonFiniteScore(f"Score of {tuple(candidate)} is {value}")
                if best_value is None or value > best_value:
                    best_option, best_value = option, value
            if best_option != current[slot]:
                current[slot] = best_option
                changed = True
            current_score = best_value
        passes += 1
        if not changed:
            return tuple(current), current_score, passes, evaluations, True, False
    return tuple(current), current_score, passes, evaluations, False, False


def greedy_search(
    score: Callable[[Assignment], float],
    space: SlottedArms,
    budget: GreedySearchBudget,
    rng: Optional[np.random.Generator] = None,
) -> GreedyResult:
    """
    Latency-bounded coordinate ascent over a slotted arm space.

    Starting from every slot's first option, each pass visits the slots in
    order and moves a slot to its best option while the others stay fixed.
    A pass costs ``Σ option counts`` evaluations, never their product. The
    search stops after ``max_passes``, after a pass without change, or when the
    deadline expires; the deadline is checked between slots. With
    ``budget.restarts > 0`` further runs start from random assignments drawn
    from ``rng`` and the best run wins, ties to the earliest.

    Args:
        score: Total function from option indices to a real score.
        space: The slotted arm space.
        budget: Passes, deadline and restarts.
        rng: Random source, required only for restarts.

    Returns:
        The chosen arm with search statistics.
    """
    deadline = _Deadline(budget.deadline_ms)
    initial: Assignment = tuple(0 for _ in space.slots)
    assignment, value, passes, evaluations, converged, timed_out = _ascend(
        score, space, initial, budget.max_passes, deadline
    )
    if timed_out and passes == 0:
        return GreedyResult(
            arm=space.arm_id(initial),
            assignment=initial,
            score=float(score(initial)),
            passes=0,
            evaluations=evaluations,
            converged=False,
            deadline_before_first_pass=True,
        )
    best = (assignment, value, passes, evaluations, converged)

    if budget.restarts and rng is not None:
        for _ in range(budget.restarts):
            if deadline.expired:
                break
            start = tuple(int(rng.integers(count)) for count in space.option_counts)
            run = _ascend(score, space, start, budget.max_passes, deadline)
            evaluations += run[3]
            if run[5] and run[2] == 0:
                continue
            if run[1] is not None and (best[1] is None or run[1] > best[1]):
                best = run[:5]

    assignment, value, passes, _, converged = best
    return GreedyResult(
        arm=space.arm_id(assignment),
        assignment=assignment,
        score=float(value) if value is not None else float(score(assignment)),
        passes=passes,
        evaluations=evaluations,
        converged=converged,
    )
