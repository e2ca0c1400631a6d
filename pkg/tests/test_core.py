"""Tests for `eazybandit.core` module."""

from typing import Any, Callable, Dict, List

import numpy as np
import pytest

from eazybandit.core import (
    Algorithm,
    BanditConfig,
    CategoricalFeature,
    ExplicitArms,
    LinearModel,
    NumericFeature,
    Slot,
    SlottedArms,
    arm_count,
    context_dimension,
    encode_context,
    enumerate_arms,
    parse_config,
    validate_config,
)
from eazybandit.exceptions import (
    InvalidConfig,
    MissingFeature,
    OutOfRange,
    SpaceTooLarge,
    UnknownFeature,
)

ConfigFactory = Callable[..., BanditConfig]
PayloadFactory = Callable[..., Dict[str, Any]]

# ------------------------------------------
# Test cases for encode_context()
# ------------------------------------------


@pytest.mark.parametrize(
    "schema,raw,expected",
    [
        ([CategoricalFeature(name="device", cardinality=2)], {"device": 0}, [1.0, 1.0, 0.0]),
        ([NumericFeature(name="hour", lo=0, hi=24)], {"hour": 12}, [1.0, 0.5]),
        (
            [
                CategoricalFeature(name="pos", cardinality=3),
                NumericFeature(name="price", lo=0, hi=100),
            ],
            {"pos": 2, "price": 25},
            [1.0, 0.0, 0.0, 1.0, 0.25],
        ),
        ([], {}, [1.0]),
    ],
)
def test_encode_context(schema: List[Any], raw: Dict[str, Any], expected: List[float]) -> None:
    """Test the intercept, one-hot and min-max blocks."""
    vector = encode_context(schema, raw)
    assert vector.tolist() == expected
    assert vector.shape == (context_dimension(schema),)


def test_encode_context_is_read_only() -> None:
    """Test that encoded vectors cannot be modified."""
    vector = encode_context([NumericFeature(name="hour", lo=0, hi=24)], {"hour": 6})
    with pytest.raises(ValueError):
        vector[0] = 2.0


def test_encode_context_with_unknown_feature() -> None:
    """Test that extra keys are rejected."""
    with pytest.raises(UnknownFeature) as e:
        encode_context([], {"device": 1})
    assert e.value.feature == "device"


def test_encode_context_with_missing_feature() -> None:
    """Test that absent schema features are rejected."""
    with pytest.raises(MissingFeature):
        encode_context([CategoricalFeature(name="device", cardinality=2)], {})


@pytest.mark.parametrize(
    "raw",
    [{"device": 2}, {"device": -1}, {"device": 0.5}, {"device": True}, {"device": "0"}],
)
def test_encode_context_with_categorical_out_of_range(raw: Dict[str, Any]) -> None:
    """Test categorical values outside ``[0, cardinality)`` or not integers."""
    with pytest.raises(OutOfRange):
        encode_context([CategoricalFeature(name="device", cardinality=2)], raw)


@pytest.mark.parametrize("value", [-0.1, 24.5, float("nan"), float("inf")])
def test_encode_context_with_numeric_out_of_range(value: float) -> None:
    """Test numeric values outside ``[lo, hi]``."""
    with pytest.raises(OutOfRange):
        encode_context([NumericFeature(name="hour", lo=0, hi=24)], {"hour": value})


def test_encode_context_accepts_integral_floats() -> None:
    """Test that ``1.0`` selects category 1."""
    schema = [CategoricalFeature(name="device", cardinality=2)]
    assert encode_context(schema, {"device": 1.0}).tolist() == [1.0, 0.0, 1.0]


# ------------------------------------------
# Test cases for validate_config()
# ------------------------------------------


def test_validate_config_with_valid_config(make_config: ConfigFactory) -> None:
    """Test that a valid configuration has no violations."""
    assert validate_config(make_config()) == []


def test_validate_config_with_single_arm(make_config: ConfigFactory) -> None:
    """Test the two-arm minimum."""
    assert "arm_space needs ≥ 2 arms" in validate_config(make_config(arms=["a"]))


def test_validate_config_with_epsilon_one(make_config: ConfigFactory) -> None:
    """Test the closed upper bound of epsilon."""
    config = make_config(algorithm="EpsilonGreedy", hyperparameters={"epsilon": 1.0})
    assert validate_config(config) == []


def test_validate_config_cascade_needs_binary(make_config: ConfigFactory) -> None:
    """Test that CascadeTS rejects continuous rewards."""
    config = make_config(algorithm="CascadeTS", reward="Continuous")
    assert "CascadeTS requires Binary reward" in validate_config(config)


def test_validate_config_reports_every_violation(make_config: ConfigFactory) -> None:
    """Test that all violations surface at once."""
    config = make_config(
        bandit_id="bad id",
        arms=["a", "a"],
        hyperparameters={"epsilon": 2.0, "exp3_gamma": 0.0},
        attribution_window=0.0,
    )
    violations = validate_config(config)
    assert len(violations) >= 5
    assert "arm ids must be unique" in violations
    assert "epsilon must lie in [0, 1]" in violations
    assert "attribution_window must be a positive duration" in violations


@pytest.mark.parametrize(
    "overrides,message",
    [
        (
            {"reward_spec": {"kind": "MultiObjective", "k": 2}},
            "ThompsonBernoulli cannot learn from MultiObjective rewards",
        ),
        (
            {
                "algorithm": "MultiObjectiveGGI",
                "reward_spec": {"kind": "MultiObjective", "k": 2},
                "hyperparameters": {"ggi_weights": [1.0]},
            },
            "ggi_weights must have length k = 2",
        ),
        (
            {
                "algorithm": "MultiObjectiveGGI",
                "reward_spec": {"kind": "MultiObjective", "k": 2},
                "hyperparameters": {"ggi_weights": [1.0, 2.0]},
            },
            "ggi_weights must be nonincreasing",
        ),
        (
            {"algorithm": "CascadeTS", "hyperparameters": {"ranking_k": 3}},
            "ranking_k 3 exceeds the 2 arms",
        ),
        (
            {"algorithm": "LinearTS", "hyperparameters": {"linear_model": "RLS"}},
            "LinearTS over RLS requires Continuous reward",
        ),
    ],
)
def test_validate_config_algorithm_rules(
    payload: PayloadFactory, overrides: Dict[str, Any], message: str
) -> None:
    """Test the algorithm and reward compatibility rules."""
    config = parse_config(payload(**overrides))
    assert message in validate_config(config)


def test_linear_model_is_inferred_from_reward(make_config: ConfigFactory) -> None:
    """Test BLR for binary rewards and RLS otherwise."""
    assert make_config(algorithm="LinearTS").linear_model is LinearModel.BLR
    continuous = make_config(algorithm="LinearTS", reward="Continuous")
    assert continuous.linear_model is LinearModel.RLS


def test_slotted_space_too_large_for_enumerating_algorithm(payload: PayloadFactory) -> None:
    """Test that Thompson sampling needs an enumerable space."""
    slots = [{"slot_name": f"s{i}", "options": [str(j) for j in range(10)]} for i in range(7)]
    config = parse_config(
        payload(arm_space={"kind": "Slotted", "slots": slots}, algorithm="EpsilonGreedy")
    )
    assert any("enumerable" in v for v in validate_config(config))


# ------------------------------------------
# Test cases for enumerate_arms()
# ------------------------------------------


def test_enumerate_explicit_keeps_declaration_order() -> None:
    """Test explicit spaces."""
    assert enumerate_arms(ExplicitArms(arm_ids=["b", "a"])) == ["b", "a"]


def test_enumerate_slotted_is_lexicographic() -> None:
    """Test slotted spaces."""
    space = SlottedArms(
        slots=[Slot(slot_name="s1", options=["x", "y"]), Slot(slot_name="s2", options=["p", "q"])]
    )
    assert enumerate_arms(space) == ["x/p", "x/q", "y/p", "y/q"]
    assert space.assignment("y/p") == (1, 0)
    assert space.arm_id((0, 1)) == "x/q"


def test_enumerate_slotted_too_large() -> None:
    """Test the enumeration cap on 7 slots of 10 options."""
    space = SlottedArms(
        slots=[
            Slot(slot_name=f"s{i}", options=[str(j) for j in range(10)]) for i in range(7)
        ]
    )
    assert arm_count(space) == 10**7
    with pytest.raises(SpaceTooLarge) as e:
        enumerate_arms(space)
    assert e.value.size == 10**7


# ------------------------------------------
# Test cases for parse_config()
# ------------------------------------------


def test_parse_config(payload: PayloadFactory) -> None:
    """Test parsing a valid payload."""
    config = parse_config(payload(algorithm="Exp3"))
    assert config.algorithm is Algorithm.EXP3
    assert not config.is_frozen
    assert config.context_dim == 1
    assert np.isclose(config.hyperparameters.exp3_gamma, 0.1)


def test_parse_config_with_missing_fields() -> None:
    """Test that missing fields become violations."""
    with pytest.raises(InvalidConfig) as e:
        parse_config({"algorithm": "Exp3"})
    assert "bandit_id: Field required" in e.value.violations
    assert any(v.startswith("reward_spec") for v in e.value.violations)


def test_parse_config_with_unknown_algorithm(payload: PayloadFactory) -> None:
    """Test that an unknown algorithm is a violation."""
    with pytest.raises(InvalidConfig) as e:
        parse_config(payload(algorithm="UCB"))
    assert any(v.startswith("algorithm") for v in e.value.violations)
