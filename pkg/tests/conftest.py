"""Shared fixtures for the eazybandit tests."""

from pathlib import Path
from typing import Any, Callable, Dict, Iterator, Sequence

import pytest

from eazybandit.core import BanditConfig
from eazybandit.store import FileBanditStore, StoreConfig


def config_payload(
    bandit_id: str = "hero",
    algorithm: str = "ThompsonBernoulli",
    arms: Sequence[str] = ("a", "b"),
    reward: str = "Binary",
    **overrides: Any,
) -> Dict[str, Any]:
    """A JSON configuration payload with sensible defaults."""
    payload: Dict[str, Any] = {
        "bandit_id": bandit_id,
        "algorithm": algorithm,
        "arm_space": {"kind": "Explicit", "arm_ids": list(arms)},
        "context_schema": [],
        "reward_spec": {"kind": reward},
        "hyperparameters": {},
        "attribution_window": 60.0,
    }
    payload.update(overrides)
    return payload


@pytest.fixture
def payload() -> Callable[..., Dict[str, Any]]:
    """Build JSON configuration payloads."""
    return config_payload


@pytest.fixture
def make_config() -> Callable[..., BanditConfig]:
    """Build validated configurations from payload arguments."""

    def factory(**kwargs: Any) -> BanditConfig:
        return BanditConfig.model_validate(config_payload(**kwargs))

    return factory


@pytest.fixture
def store(tmp_path: Path) -> Iterator[FileBanditStore]:
    """An empty file-backed store without fsync."""
    yield FileBanditStore(config=StoreConfig(root=tmp_path / "store", fsync=False))
