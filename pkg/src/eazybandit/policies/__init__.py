"""Bandit policies: non-contextual, linear contextual and structured."""
from eazybandit.policies.base import (
    SHARED_MODEL,
    ApplyResult,
    Choice,
    GGIState,
    Policy,
    policy_for,
)

__all__ = ["SHARED_MODEL", "ApplyResult", "Choice", "GGIState", "Policy", "policy_for"]
