"""HTTP surface of the platform: configuration, decisions and rewards."""

import asyncio
import logging
from contextlib import asynccontextmanager
from typing import Any, AsyncIterator, Dict, List, Optional, Union

from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, ConfigDict, Field

from eazybandit import __version__
from eazybandit.core import Decision
from eazybandit.exceptions import (
    ImmutableFieldChanged,
    InvalidConfig,
    Overloaded,
    RefreshFailed,
    UnknownBandit,
    ValidationFailure,
)
from eazybandit.service import Platform

logger = logging.getLogger(__name__)


class CreateResponse(BaseModel):
    """Acknowledgement of a created or resubmitted bandit."""

    bandit_id: str
    version: int


class FreezeResponse(BaseModel):
    """Acknowledgement of a freeze; ``note`` is set when the bandit was already frozen."""

    bandit_id: str
    status: str
    note: Optional[str] = None


class SampleRequest(BaseModel):
    """Body of a sample request."""

    model_config = ConfigDict(extra="forbid")

    session_id: str = Field(..., min_length=1)
    context: Dict[str, Union[int, float]] = Field(default_factory=dict)


class RewardRequest(BaseModel):
    """Body of a reward report for an earlier decision."""

    model_config = ConfigDict(extra="forbid")

    request_id: str
    values: List[float] = Field(default_factory=lambda: [1.0])
    click_position: Optional[int] = None
    timestamp: Optional[float] = None


class BanditView(BaseModel):
    """A bandit's configuration and the state of its parameters."""

    config: Dict[str, Any]
    version: int
    train_seq: int
    updated_at: float


def _error(status_code: int, exc: Exception, **extra: Any) -> JSONResponse:
    return JSONResponse(status_code=status_code, content={"detail": str(exc), **extra})


def create_app(platform: Platform, tick_interval: float = 1.0) -> FastAPI:
    """
    Build the FastAPI application serving a platform.

    While the application runs, the platform's trainer, snapshot refresher
    and pipeline clock run alongside it.

    Args:
        platform: The platform to serve.
        tick_interval: Seconds between pipeline clock ticks.

    Returns:
        The application.
    """

    @asynccontextmanager
    async def lifespan(app: FastAPI) -> AsyncIterator[None]:
        stop = asyncio.Event()
        loops = asyncio.create_task(platform.run(stop, tick_interval))
        yield
        stop.set()
        await loops
        platform.close()

    app = FastAPI(title="eazybandit", version=__version__, lifespan=lifespan)

    @app.exception_handler(InvalidConfig)
    async def invalid_config(request: Request, exc: InvalidConfig) -> JSONResponse:
        return _error(400, exc, violations=exc.violations)

    @app.exception_handler(ImmutableFieldChanged)
    async def immutable_field(request: Request, exc: ImmutableFieldChanged) -> JSONResponse:
        return _error(409, exc, fields=exc.fields)

    @app.exception_handler(ValidationFailure)
    async def validation_failure(request: Request, exc: ValidationFailure) -> JSONResponse:
        return _error(400, exc)

    @app.exception_handler(UnknownBandit)
    async def unknown_bandit(request: Request, exc: UnknownBandit) -> JSONResponse:
        return _error(404, exc)

    @app.exception_handler(Overloaded)
    async def overloaded(request: Request, exc: Overloaded) -> JSONResponse:
        return _error(503, exc)

    @app.exception_handler(RefreshFailed)
    async def refresh_failed(request: Request, exc: RefreshFailed) -> JSONResponse:
        return _error(503, exc)

    @app.post("/v1/bandits", response_model=CreateResponse, status_code=201)
    async def create_bandit(payload: Dict[str, Any]) -> CreateResponse:
        version = await run_in_threadpool(platform.sampler.admin_create, payload)
        logger.info("Bandit %s configured at version %d", payload.get("bandit_id"), version)
        return CreateResponse(bandit_id=payload["bandit_id"], version=version)

    @app.post("/v1/bandits/{bandit_id}/freeze", response_model=FreezeResponse)
    async def freeze_bandit(bandit_id: str) -> FreezeResponse:
        ack = await run_in_threadpool(platform.sampler.admin_freeze, bandit_id)
        return FreezeResponse(**ack)

    @app.post("/v1/bandits/{bandit_id}/sample", response_model=Decision)
    async def sample(bandit_id: str, body: SampleRequest) -> Decision:
        return await run_in_threadpool(
            platform.sampler.sample, bandit_id, body.session_id, body.context
        )

    @app.post("/v1/bandits/{bandit_id}/rewards", status_code=202)
    async def report_reward(bandit_id: str, body: RewardRequest) -> Dict[str, str]:
        await run_in_threadpool(
            platform.record_reward,
            bandit_id,
            body.request_id,
            body.values,
            body.click_position,
            body.timestamp,
        )
        return {"request_id": body.request_id, "status": "accepted"}

    @app.get("/v1/bandits/{bandit_id}", response_model=BanditView)
    async def get_bandit(bandit_id: str) -> BanditView:
        config, params = platform.store.snapshot(bandit_id)
        return BanditView(
            config=config.model_dump(mode="json"),
            version=params.version,
            train_seq=params.train_seq,
            updated_at=params.updated_at,
        )

    @app.get("/healthz")
    async def healthz() -> Dict[str, Any]:
        return {"status": "ok", "bandits": len(platform.store.list_bandits())}

    @app.get("/metrics", response_class=PlainTextResponse)
    async def metrics() -> str:
        return "".join(f"{key} {value}\n" for key, value in sorted(platform.metrics().items()))

    return app
