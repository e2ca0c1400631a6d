"""Tests for `eazybandit` module."""
import logging
from pathlib import Path
from typing import Any, Dict, Generator

import pydantic
import pytest
import toml

import eazybandit
from eazybandit.settings import SamplerSettings, ServeSettings, configure_logging


@pytest.fixture
def version() -> Generator[str, None, None]:
    """Sample pytest fixture."""
    yield eazybandit.__version__


def test_version(version: str) -> None:
    """Test whether version in eazybandit.__version__ is the same as in pyproject.toml."""
    # Load the pyproject.toml file
    pyproject = toml.load("pyproject.toml")

    # Get the version number from the [tool.poetry] section
    expected_version = pyproject["tool"]["poetry"]["version"]

    assert version == expected_version


def test_serve_settings_layout(tmp_path: Path) -> None:
    """Test the directories of the data directory."""
    settings = ServeSettings(data_dir=tmp_path)
    assert settings.store_dir == tmp_path / "store"
    assert settings.logs_dir == tmp_path / "logs"
    assert settings.reports_dir == tmp_path / "reports"
    assert settings.sampler == SamplerSettings()
    assert settings.sampler.ttl == 1800.0


@pytest.mark.parametrize(
    "kwargs", [{"ttl": 0.0}, {"capacity": 0}, {"refresh_period": -1.0}, {"max_in_flight": 0}]
)
def test_sampler_settings_validation(kwargs: Dict[str, Any]) -> None:
    """Test that non-positive settings are rejected."""
    with pytest.raises(pydantic.ValidationError):
        SamplerSettings(**kwargs)


def test_configure_logging_is_idempotent() -> None:
    """Test that a second call only changes the level."""
    logger = logging.getLogger("eazybandit")
    configure_logging("info")
    handlers = len(logger.handlers)
    configure_logging(logging.DEBUG)
    assert len(logger.handlers) == handlers
    assert logger.level == logging.DEBUG
