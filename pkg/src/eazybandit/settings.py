"""Service settings and logging setup."""

import logging
from pathlib import Path
from typing import Union

from pydantic import BaseModel, ConfigDict, Field

from eazybandit.pipeline import FlushPolicy

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Union[int, str] = logging.WARNING) -> None:
    """
    Install one stream handler on the ``eazybandit`` logger.

    Calling it again only changes the level.

    Args:
        level: Level name or number.
    """
    logger = logging.getLogger("eazybandit")
    if isinstance(level, str):
        level = level.upper()
    logger.setLevel(level)
    if not any(getattr(h, "_eazybandit", False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._eazybandit = True  # type: ignore[attr-defined]
        logger.addHandler(handler)


class SamplerSettings(BaseModel):
    """
    Pydantic model for the decision service settings.

    Args:
        refresh_period (float): Seconds between snapshot refreshes.
        ttl (float): Seconds a session keeps its decision.
        capacity (int): Most sessions the consistency cache holds.
        max_in_flight (int): Most concurrent sample requests before shedding load.
    """

    model_config = ConfigDict(frozen=True)

    refresh_period: float = Field(10.0, gt=0.0, description="Seconds between refreshes.")
    ttl: float = Field(1800.0, gt=0.0, description="Session stickiness in seconds.")
    capacity: int = Field(100_000, ge=1, description="Consistency cache capacity.")
    max_in_flight: int = Field(1024, ge=1, description="Concurrent sample requests allowed.")


class ServeSettings(BaseModel):
    """
    Pydantic model for the integrated service.

    Args:
        data_dir (Path): Root holding ``store/``, ``logs/`` and ``reports/``.
        host (str): Interface to bind.
        port (int): Port to bind.
        sampler (SamplerSettings): Decision service settings.
        flush_policy (FlushPolicy): Batching bounds of the reward pipeline.
        tick_interval (float): Wall-clock seconds between pipeline clock ticks.
    """

    data_dir: Path
    host: str = "127.0.0.1"
    port: int = Field(8080, ge=0, le=65535)
    sampler: SamplerSettings = Field(default_factory=SamplerSettings)
    flush_policy: FlushPolicy = Field(default_factory=FlushPolicy)
    tick_interval: float = Field(1.0, gt=0.0)

    @property
    def store_dir(self) -> Path:
        """Directory of the bandit store."""
        return self.data_dir / "store"

    @property
    def logs_dir(self) -> Path:
        """Directory of the clickstream and batch logs."""
        return self.data_dir / "logs"

    @property
    def reports_dir(self) -> Path:
        """Directory of simulation reports."""
        return self.data_dir / "reports"
