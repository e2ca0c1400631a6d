"""Domain types, configuration model and context encoding shared by every module."""

import itertools
import math
import re
from enum import Enum
from typing import Annotated, Any, List, Literal, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from eazybandit.exceptions import (
    InvalidConfig,
    MissingFeature,
    OutOfRange,
    SpaceTooLarge,
    UnknownFeature,
)

#: Largest slotted space that may be enumerated; beyond it only greedy search applies.
ENUMERATION_CAP = 10**6

#: Separator joining slot options into a slotted arm id.
SLOT_SEPARATOR = "/"

_BANDIT_ID_RE = re.compile(r"^[a-zA-Z0-9_][a-zA-Z0-9_.-]*$")


class Algorithm(str, Enum):
    """Sampling algorithms a bandit can be configured with."""

    EPSILON_GREEDY = "EpsilonGreedy"
    THOMPSON_BERNOULLI = "ThompsonBernoulli"
    EXP3 = "Exp3"
    LINEAR_TS = "LinearTS"
    LINEAR_EG = "LinearEG"
    LINEAR_IGW = "LinearIGW"
    CASCADE_TS = "CascadeTS"
    MULTI_OBJECTIVE_GGI = "MultiObjectiveGGI"

    @property
    def is_linear(self) -> bool:
        """Whether the algorithm is backed by per-arm linear models."""
        return self in (Algorithm.LINEAR_TS, Algorithm.LINEAR_EG, Algorithm.LINEAR_IGW)

    @property
    def is_ranking(self) -> bool:
        """Whether decisions are ordered lists of arms."""
        return self is Algorithm.CASCADE_TS


class RewardKind(str, Enum):
    """Kinds of reward a bandit learns from."""

    BINARY = "Binary"
    CONTINUOUS = "Continuous"
    MULTI_OBJECTIVE = "MultiObjective"


class LinearModel(str, Enum):
    """Online model updating a linear policy's posterior."""

    RLS = "RLS"
    BLR = "BLR"


class Status(str, Enum):
    """Lifecycle status of a bandit."""

    LEARNING = "Learning"
    FROZEN = "Frozen"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class RewardSpec(_Frozen):
    """
    Reward specification of a bandit.

    Args:
        kind: Binary, Continuous or MultiObjective.
        k: Number of objectives; only meaningful for MultiObjective rewards.
    """

    kind: RewardKind
    k: Optional[int] = Field(None, description="Number of objectives (MultiObjective only).")

    @property
    def num_objectives(self) -> int:
        """Length of the reward vector carried by reward events."""
        if self.kind is RewardKind.MULTI_OBJECTIVE:
            return int(self.k or 0)
        return 1


class CategoricalFeature(_Frozen):
    """A categorical context feature taking integer values in ``[0, cardinality)``."""

    name: str
    kind: Literal["Categorical"] = "Categorical"
    cardinality: int


class NumericFeature(_Frozen):
    """A numeric context feature taking values in ``[lo, hi]``."""

    name: str
    kind: Literal["Numeric"] = "Numeric"
    lo: float
    hi: float


FeatureSpec = Annotated[Union[CategoricalFeature, NumericFeature], Field(discriminator="kind")]


class Slot(_Frozen):
    """One slot of a slotted arm space and its candidate options."""

    slot_name: str
    options: List[str]


class ExplicitArms(_Frozen):
    """An arm space listing every arm id."""

    kind: Literal["Explicit"] = "Explicit"
    arm_ids: List[str]


class SlottedArms(_Frozen):
    """A combinatorial arm space: one option per slot makes an arm."""

    kind: Literal["Slotted"] = "Slotted"
    slots: List[Slot]

    @property
    def option_counts(self) -> List[int]:
        """Number of options of every slot, in slot order."""
        return [len(slot.options) for slot in self.slots]

    def arm_id(self, assignment: Tuple[int, ...]) -> str:
        """Arm id for an assignment of option indices.

        >>> space = SlottedArms(slots=[Slot(slot_name="a", options=["x", "y"])])
        >>> space.arm_id((1,))
        'y'
        """
        return SLOT_SEPARATOR.join(
            slot.options[index] for slot, index in zip(self.slots, assignment)
        )

    def assignment(self, arm_id: str) -> Tuple[int, ...]:
        """Option indices of an arm id.

        Raises:
            ValueError: If the arm id does not belong to the space.
        """
        parts = arm_id.split(SLOT_SEPARATOR)
        if len(parts) != len(self.slots):
            raise ValueError(f"Arm {arm_id!r} does not match {len(self.slots)} slots")
        return tuple(slot.options.index(part) for slot, part in zip(self.slots, parts))


ArmSpace = Annotated[Union[ExplicitArms, SlottedArms], Field(discriminator="kind")]


class HyperParams(_Frozen):
    """Tunable knobs of every algorithm; each algorithm reads the ones it needs."""

    epsilon: float = 0.1
    exp3_gamma: float = 0.1
    prior_variance: float = 1.0
    igw_gamma0: float = 1.0
    ggi_weights: List[float] = Field(default_factory=list)
    ranking_k: int = 1
    greedy_passes: int = 3
    greedy_restarts: int = 0
    latency_budget: float = Field(50.0, description="Milliseconds allowed for greedy search.")
    linear_model: Optional[LinearModel] = None


class BanditConfig(_Frozen):
    """
    Pydantic model for a bandit's configuration.

    This is the payload of the configuration API and of ``create-bandit``.
    Field types are checked on construction; the remaining invariants are
    reported by :func:`validate_config` so that all of them surface at once.
    """

    bandit_id: str
    algorithm: Algorithm
    arm_space: ArmSpace
    context_schema: List[FeatureSpec] = Field(default_factory=list)
    reward_spec: RewardSpec
    hyperparameters: HyperParams = Field(default_factory=HyperParams)
    attribution_window: float = Field(..., description="Seconds of event time.")
    status: Status = Status.LEARNING

    @property
    def is_frozen(self) -> bool:
        """Whether the bandit serves exploit-only decisions."""
        return self.status is Status.FROZEN

    @property
    def context_dim(self) -> int:
        """Dimension of the encoded context vector."""
        return context_dimension(self.context_schema)

    @property
    def linear_model(self) -> LinearModel:
        """Linear model backing linear and multi-objective policies."""
        return resolve_linear_model(self)


class Decision(_Frozen):
    """The arm, or ranked arms, served for one sample request."""

    bandit_id: str
    request_id: str
    session_id: str
    arm: Union[str, List[str]]
    param_version: int
    served_at: float
    probability: Optional[float] = None


def context_dimension(schema: List[Any]) -> int:
    """Dimension of the encoded vector: intercept, one-hot blocks, then numerics.

    >>> context_dimension([CategoricalFeature(name="d", cardinality=3),
    ...                    NumericFeature(name="h", lo=0, hi=1)])
    5
    """
    return 1 + sum(
        feature.cardinality if isinstance(feature, CategoricalFeature) else 1 for feature in schema
    )


def resolve_linear_model(config: BanditConfig) -> LinearModel:
    """Return the configured linear model, inferring it from the reward spec when unset."""
    if config.hyperparameters.linear_model is not None:
        return config.hyperparameters.linear_model
    if config.reward_spec.kind is RewardKind.BINARY:
        return LinearModel.BLR
    return LinearModel.RLS


def encode_context(schema: List[Any], raw: Mapping[str, Any]) -> np.ndarray:
    """
    Encode a raw context into a dense vector.

    The vector starts with an intercept fixed at 1.0, followed by one block per
    feature in schema order: a one-hot block for categoricals and a min-max
    scaled value for numerics.

    Examples:
        >>> encode_context([CategoricalFeature(name="pos", cardinality=3),
        ...                 NumericFeature(name="price", lo=0, hi=100)],
        ...                {"pos": 2, "price": 25}).tolist()
        [1.0, 0.0, 0.0, 1.0, 0.25]

    Args:
        schema: Ordered feature specs.
        raw: Feature name to value.

    Returns:
        A read-only float64 vector.

    Raises:
        UnknownFeature: If ``raw`` names a feature missing from the schema.
        MissingFeature: If a schema feature is absent from ``raw``.
        OutOfRange: If a value lies outside its feature's domain.
    """
    names = {feature.name for feature in schema}
    for key in raw:
        if key not in names:
            raise UnknownFeature(key)

    vector = np.zeros(context_dimension(schema), dtype=np.float64)
    vector[0] = 1.0
    offset = 1
    for feature in schema:
        if feature.name not in raw:
            raise MissingFeature(feature.name)
        value = raw[feature.name]
        if isinstance(feature, CategoricalFeature):
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                if not (isinstance(value, float) and value.is_integer()):
                    raise OutOfRange(feature.name, value)
            index = int(value)
            if not 0 <= index < feature.cardinality:
                raise OutOfRange(feature.name, value)
            vector[offset + index] = 1.0
            offset += feature.cardinality
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
                raise OutOfRange(feature.name, value)
            number = float(value)
            if not math.isfinite(number) or not feature.lo <= number <= feature.hi:
                raise OutOfRange(feature.name, value)
            vector[offset] = (number - feature.lo) / (feature.hi - feature.lo)
            offset += 1
    vector.flags.writeable = False
    return vector


def arm_count(space: Union[ExplicitArms, SlottedArms]) -> int:
    """Total number of arms in a space."""
    if isinstance(space, ExplicitArms):
        return len(space.arm_ids)
    return math.prod(space.option_counts)


def enumerate_arms(
    space: Union[ExplicitArms, SlottedArms], cap: int = ENUMERATION_CAP
) -> List[str]:
    """
    List every arm id of a space in a deterministic order.

    Explicit spaces keep declaration order. Slotted spaces are enumerated as the
    lexicographic product of slot options, ids joined by ``/`` in slot order.

    Examples:
        >>> enumerate_arms(SlottedArms(slots=[Slot(slot_name="s1", options=["x", "y"]),
        ...                                   Slot(slot_name="s2", options=["p", "q"])]))
        ['x/p', 'x/q', 'y/p', 'y/q']

    Args:
        space: The arm space.
        cap: Maximum number of arms a slotted space may expand to.

    Returns:
        Ordered arm ids.

    Raises:
        SpaceTooLarge: If a slotted space holds more than ``cap`` arms.
    """
    if isinstance(space, ExplicitArms):
        return list(space.arm_ids)
    size = arm_count(space)
    if size > cap:
        raise SpaceTooLarge(size, cap)
    return [
        SLOT_SEPARATOR.join(combination)
        for combination in itertools.product(*(slot.options for slot in space.slots))
    ]


def validate_config(config: BanditConfig) -> List[str]:
    """
    Check every invariant of a bandit configuration.

    Args:
        config: The configuration to check.

    Returns:
        Every violated invariant as a message; an empty list means the config is valid.
    """
    violations: List[str] = []
    algorithm = config.algorithm
    params = config.hyperparameters
    reward = config.reward_spec

    if not _BANDIT_ID_RE.match(config.bandit_id):
        violations.append(f"bandit_id {config.bandit_id!r} must match {_BANDIT_ID_RE.pattern}")

    violations.extend(_arm_space_violations(config.arm_space))
    total_arms = arm_count(config.arm_space)
    if total_arms < 2:
        violations.append("arm_space needs ≥ 2 arms")
    slotted = isinstance(config.arm_space, SlottedArms)
    needs_enumeration = not (algorithm.is_linear or algorithm is Algorithm.MULTI_OBJECTIVE_GGI)
    if algorithm is Algorithm.LINEAR_IGW:
        needs_enumeration = True
    if slotted and needs_enumeration and total_arms > ENUMERATION_CAP:
        violations.append(
            f"{algorithm.value} requires an enumerable arm space (≤ {ENUMERATION_CAP} arms)"
        )

    names = [feature.name for feature in config.context_schema]
    if len(set(names)) != len(names):
        violations.append("context_schema feature names must be unique")
    for feature in config.context_schema:
        if isinstance(feature, CategoricalFeature):
            if feature.cardinality < 1:
                violations.append(f"feature {feature.name} needs cardinality ≥ 1")
        elif not (math.isfinite(feature.lo) and math.isfinite(feature.hi)) or not (
            feature.lo < feature.hi
        ):
            violations.append(f"feature {feature.name} needs finite lo < hi")

    if reward.kind is RewardKind.MULTI_OBJECTIVE:
        if reward.k is None or reward.k < 2:
            violations.append("MultiObjective reward requires k ≥ 2")
        elif len(params.ggi_weights) != reward.k:
            violations.append(f"ggi_weights must have length k = {reward.k}")
        if algorithm is not Algorithm.MULTI_OBJECTIVE_GGI:
            violations.append(f"{algorithm.value} cannot learn from MultiObjective rewards")
    elif algorithm is Algorithm.MULTI_OBJECTIVE_GGI:
        violations.append("MultiObjectiveGGI requires MultiObjective reward")

    if algorithm in (Algorithm.THOMPSON_BERNOULLI, Algorithm.CASCADE_TS):
        if reward.kind is not RewardKind.BINARY:
            violations.append(f"{algorithm.value} requires Binary reward")
    if algorithm.is_linear or algorithm is Algorithm.MULTI_OBJECTIVE_GGI:
        model = resolve_linear_model(config)
        if model is LinearModel.BLR and reward.kind is not RewardKind.BINARY:
            violations.append(f"{algorithm.value} over BLR requires Binary reward")
        if model is LinearModel.RLS and reward.kind is RewardKind.BINARY:
            violations.append(f"{algorithm.value} over RLS requires Continuous reward")

    if not 0.0 <= params.epsilon <= 1.0:
        violations.append("epsilon must lie in [0, 1]")
    if not 0.0 < params.exp3_gamma <= 1.0:
        violations.append("exp3_gamma must lie in (0, 1]")
    if not params.prior_variance > 0.0:
        violations.append("prior_variance must be > 0")
    if not params.igw_gamma0 > 0.0:
        violations.append("igw_gamma0 must be > 0")
    if any(not (w > 0.0 and math.isfinite(w)) for w in params.ggi_weights):
        violations.append("ggi_weights must be strictly positive")
    if any(a < b for a, b in zip(params.ggi_weights, params.ggi_weights[1:])):
        violations.append("ggi_weights must be nonincreasing")
    if params.ranking_k < 1:
        violations.append("ranking_k must be ≥ 1")
    elif algorithm is Algorithm.CASCADE_TS and params.ranking_k > total_arms:
        violations.append(f"ranking_k {params.ranking_k} exceeds the {total_arms} arms")
    if params.greedy_passes < 1:
        violations.append("greedy_passes must be ≥ 1")
    if params.greedy_restarts < 0:
        violations.append("greedy_restarts must be ≥ 0")
    if not params.latency_budget > 0.0:
        violations.append("latency_budget must be > 0")
    if not (config.attribution_window > 0.0 and math.isfinite(config.attribution_window)):
        violations.append("attribution_window must be a positive duration")
    return violations


def parse_config(payload: Mapping[str, Any]) -> BanditConfig:
    """
    Build a configuration from its JSON payload.

    Raises:
        InvalidConfig: If a field is missing or has the wrong type.
    """
    try:
        return BanditConfig.model_validate(payload)
    except ValidationError as e:
        raise InvalidConfig(
            [
                f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
                for err in e.errors()
            ]
        ) from e


def _arm_space_violations(space: Union[ExplicitArms, SlottedArms]) -> List[str]:
    violations = []
    if isinstance(space, ExplicitArms):
        if len(set(space.arm_ids)) != len(space.arm_ids):
            violations.append("arm ids must be unique")
        if any(not arm for arm in space.arm_ids):
            violations.append("arm ids must be non-empty")
        return violations
    if not space.slots:
        violations.append("slotted arm_space needs ≥ 1 slot")
    slot_names = [slot.slot_name for slot in space.slots]
    if len(set(slot_names)) != len(slot_names):
        violations.append("slot names must be unique")
    for slot in space.slots:
        if not slot.options:
            violations.append(f"slot {slot.slot_name} needs ≥ 1 option")
        if len(set(slot.options)) != len(slot.options):
            violations.append(f"slot {slot.slot_name} options must be unique")
        if any(not option or SLOT_SEPARATOR in option for option in slot.options):
            violations.append(
                f"slot {slot.slot_name} options must be non-empty and free of {SLOT_SEPARATOR!r}"
            )
    return violations

