"""Clickstream events and the training batches joined from them."""

from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, field_validator

Arm = Union[str, List[str]]


class _Event(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ImpressionEvent(_Event):
    """
    A served decision as written to the clickstream.

    Attributes:
        bandit_id: Bandit that made the decision.
        request_id: Decision id; unique per bandit.
        session_id: Session the decision was served to.
        arm: Chosen arm, or ranked arms for ranking bandits.
        context: Encoded context vector.
        param_version: Parameter version the decision was sampled from.
        timestamp: Event time in seconds.
        probability: Probability the arm was drawn with, where the policy knows it.
    """

    kind: Literal["impression"] = "impression"
    bandit_id: str
    request_id: str
    session_id: str
    arm: Arm
    context: List[float]
    param_version: int
    timestamp: float
    probability: Optional[float] = None


class RewardEvent(_Event):
    """Feedback on one decision, keyed by its ``request_id``."""

    kind: Literal["reward"] = "reward"
    bandit_id: str
    request_id: str
    values: List[float]
    click_position: Optional[int] = None
    timestamp: float


class TrainingExample(_Event):
    """An impression joined with its aggregated reward (or the default one)."""

    request_id: str
    context: List[float]
    arm: Arm
    reward: List[float]
    click_position: Optional[int] = None
    probability: Optional[float] = None
    timestamp: float


class TrainingBatch(_Event):
    """
    An ordered run of training examples for one bandit.

    ``seq`` increases by one per emitted batch and is the store's replay fence.
    """

    bandit_id: str
    seq: int
    examples: List[TrainingExample]
    window: Tuple[float, float]

    @field_validator("examples")
    @classmethod
    def check_examples(cls, examples: List[TrainingExample]) -> List[TrainingExample]:
        """Batches are never empty."""
        if not examples:
            raise ValueError("a training batch needs at least one example")
        return examples
