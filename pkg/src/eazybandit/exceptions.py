"""Exceptions raised by eazybandit."""
from typing import List, Optional, Sequence


class EazyBanditError(Exception):
    """Base class for every error raised by eazybandit."""

    pass


class ValidationFailure(EazyBanditError):
    """Raised when caller-supplied data does not match what a bandit expects."""

    pass


# ---------------------------------------
# Configuration and context
# ---------------------------------------


class InvalidConfig(ValidationFailure):
    """Raised when a bandit configuration violates one or more invariants."""

    def __init__(self, violations: Sequence[str]) -> None:
        self.violations: List[str] = list(violations)
        super().__init__("Invalid bandit configuration: " + "; ".join(self.violations))


class ImmutableFieldChanged(ValidationFailure):
    """Raised when a resubmitted config alters a field fixed at creation."""

    def __init__(self, bandit_id: str, fields: Sequence[str]) -> None:
        self.bandit_id = bandit_id
        self.fields: List[str] = list(fields)
        super().__init__(
            f"Bandit {bandit_id} cannot change immutable field(s): {', '.join(self.fields)}"
        )


class SpaceTooLarge(ValidationFailure):
    """Raised when an arm space is too large to enumerate."""

    def __init__(self, size: int, cap: int) -> None:
        self.size = size
        self.cap = cap
        super().__init__(f"Arm space of {size} arms exceeds the enumeration cap of {cap}")


class InvalidContext(ValidationFailure):
    """Raised when a raw context does not match the bandit's context schema."""

    def __init__(self, feature: str, message: str) -> None:
        self.feature = feature
        super().__init__(message)


class MissingFeature(InvalidContext):
    """Raised when a schema feature is absent from the raw context."""

    def __init__(self, feature: str) -> None:
        super().__init__(feature, f"Missing feature: {feature}")


class UnknownFeature(InvalidContext):
    """Raised when the raw context names a feature the schema does not declare."""

    def __init__(self, feature: str) -> None:
        super().__init__(feature, f"Unknown feature: {feature}")


class OutOfRange(InvalidContext):
    """Raised when a feature value falls outside its declared domain."""

    def __init__(self, feature: str, value: object) -> None:
        self.value = value
        super().__init__(feature, f"Value {value!r} out of range for feature {feature}")


class SchemaViolation(ValidationFailure):
    """Raised when a clickstream event does not match its bandit's config."""

    pass


class BatchMismatch(ValidationFailure):
    """Raised when a training batch is handed to the wrong bandit."""

    pass


# ---------------------------------------
# Policy-level errors
# ---------------------------------------


class PolicyError(EazyBanditError):
    """Raised by a policy operation that cannot accept its input."""

    pass


class EmptyArmSet(PolicyError):
    """Raised when a policy state has no arms to choose from."""

    pass


class UnknownArm(PolicyError):
    """Raised when an arm id is not part of the policy state."""

    def __init__(self, arm: object) -> None:
        self.arm = arm
        super().__init__(f"Unknown arm: {arm!r}")


class NonBinaryReward(PolicyError):
    """Raised when a Bernoulli policy receives a reward outside {0, 1}."""

    def __init__(self, reward: object) -> None:
        self.reward = reward
        super().__init__(f"Reward {reward!r} is not binary")


class NonBinaryLabel(NonBinaryReward):
    """Raised when a logistic update receives a label outside {0, 1}."""

    pass


class RewardOutOfRange(PolicyError):
    """Raised when a reward falls outside the interval a policy accepts."""

    def __init__(self, reward: object) -> None:
        self.reward = reward
        super().__init__(f"Reward {reward!r} is outside [0, 1]")


class ZeroProbability(PolicyError):
    """Raised when an importance weight would divide by a non-positive probability."""

    pass


class MissingProbability(ZeroProbability):
    """Raised when an Exp3 example does not carry its sampling probability."""

    pass


class DimensionMismatch(PolicyError):
    """Raised when a context vector's dimension differs from the model's."""

    def __init__(self, expected: int, actual: int) -> None:
        self.expected = expected
        self.actual = actual
        super().__init__(f"Expected a context of dimension {expected}, got {actual}")


class NonFiniteInput(PolicyError):
    """Raised when an observation contains NaN or infinite values."""

    pass


class NonFiniteScore(PolicyError):
    """Raised when a score vector contains NaN or infinite values."""

    pass


class LengthMismatch(PolicyError):
    """Raised when a reward vector and a weight vector differ in length."""

    pass


class KTooLarge(PolicyError):
    """Raised when a ranking asks for more items than exist."""

    pass


class PositionOutOfRange(PolicyError):
    """Raised when a click position lies outside the shown ranking."""

    pass


class EmptyBatch(PolicyError):
    """Raised when a batch update receives no observations."""

    pass


class NoConvergence(PolicyError):
    """Raised when mode finding does not reach its gradient tolerance."""

    pass


class AlgorithmMismatch(PolicyError):
    """Raised when a policy state does not belong to the configured algorithm."""

    pass


# ---------------------------------------
# Store and service errors
# ---------------------------------------


class UnknownBandit(EazyBanditError):
    """Raised when a bandit id is not present in the store."""

    def __init__(self, bandit_id: str) -> None:
        self.bandit_id = bandit_id
        super().__init__(f"Unknown bandit: {bandit_id}")


class Conflict(EazyBanditError):
    """Raised when a compare-and-swap write is rejected."""

    VERSION = "version"
    STALE_TRAIN_SEQ = "stale_train_seq"
    FROZEN = "frozen"

    def __init__(self, bandit_id: str, reason: str, message: Optional[str] = None) -> None:
        self.bandit_id = bandit_id
        self.reason = reason
        super().__init__(message or f"Conflict on bandit {bandit_id}: {reason}")


class AlreadyFrozen(EazyBanditError):
    """Raised when freezing a bandit that is already frozen."""

    def __init__(self, bandit_id: str) -> None:
        self.bandit_id = bandit_id
        super().__init__(f"Bandit {bandit_id} is already frozen")


class NotFrozen(EazyBanditError):
    """Raised when an operation requires a frozen bandit."""

    def __init__(self, bandit_id: str) -> None:
        self.bandit_id = bandit_id
        super().__init__(f"Bandit {bandit_id} is not frozen")


class StoreError(EazyBanditError):
    """Raised when the bandit store cannot read or write its files."""

    pass


class RefreshFailed(EazyBanditError):
    """Raised when the sampler cannot refresh a parameter snapshot."""

    pass


class Overloaded(EazyBanditError):
    """Raised when the sampler has no capacity left for another request."""

    pass


class TrainerError(EazyBanditError):
    """Raised when the trainer cannot commit a batch after retrying."""

    pass


# ---------------------------------------
# Simulation errors
# ---------------------------------------


class EnvironmentMismatch(ValidationFailure):
    """Raised when a simulated environment does not fit the bandit it drives."""

    pass


class SimulationFailed(EazyBanditError):
    """Raised when a simulated run trains on poisoned or failed batches."""

    pass
