"""The integrated platform: store, sampler, reward pipeline and trainer over one data directory."""

import asyncio
import logging
import threading
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import orjson

from eazybandit.events import RewardEvent, TrainingBatch
from eazybandit.journal import dumps
from eazybandit.pipeline import (
    BatchLog,
    Event,
    EventLog,
    FlushPolicy,
    JoinCounters,
    RewardPipeline,
)
from eazybandit.sampler import Sampler
from eazybandit.settings import SamplerSettings
from eazybandit.store import FileBanditStore, StoreConfig
from eazybandit.trainer import Trainer

logger = logging.getLogger(__name__)


def flush_policy_path(data_dir: Union[str, Path], bandit_id: str) -> Path:
    """Where the flush policy a bandit's batches were cut with is saved."""
    return Path(data_dir) / "logs" / f"{bandit_id}.flush.json"


def saved_flush_policy(data_dir: Union[str, Path], bandit_id: str) -> Optional[FlushPolicy]:
    """The saved flush policy of a bandit, if any."""
    path = flush_policy_path(data_dir, bandit_id)
    if not path.exists():
        return None
    return FlushPolicy.model_validate(orjson.loads(path.read_bytes()))


class Platform:
    """
    Every component of the platform wired together in one process.

    Decisions served by the sampler are logged as impressions and fed to the
    bandit's reward pipeline together with incoming rewards. Batches the
    pipeline cuts are appended to the bandit's batch log and handed to the
    trainer: on the trainer queue while :meth:`run` is active, inline
    otherwise.

    Layout of ``data_dir``: ``store/`` for bandit logs, ``logs/`` for the
    clickstream and batch logs.

    Attributes:
        store: The bandit store.
        events: The clickstream logs.
        trainer: The trainer committing batches.
        sampler: The decision service.
        flush_policy: Batching bounds of every pipeline.
    """

    def __init__(
        self,
        data_dir: Union[str, Path],
        sampler_settings: Optional[SamplerSettings] = None,
        flush_policy: Optional[FlushPolicy] = None,
        clock: Callable[[], float] = time.time,
        rng: Optional[np.random.Generator] = None,
        request_ids: Optional[Callable[[str], str]] = None,
        fsync: bool = True,
    ) -> None:
        self.data_dir = Path(data_dir)
        self.clock = clock
        self.flush_policy = flush_policy or FlushPolicy()
        self._lock = threading.RLock()
        self.store = FileBanditStore(
            config=StoreConfig(root=self.data_dir / "store", fsync=fsync), clock=clock
        )
        self.events = EventLog(self.data_dir / "logs", self.store.get_config, fsync=fsync)
        self.trainer = Trainer(self.store)
        self.sampler = Sampler(
            self.store,
            sampler_settings,
            rng=rng,
            clock=clock,
            on_impression=self.ingest,
            request_ids=request_ids,
            decision_lock=self._lock,
        )
        self._fsync = fsync
        self._pipelines: Dict[str, RewardPipeline] = {}
        self._batch_logs: Dict[str, BatchLog] = {}
        self._queue: "Optional[asyncio.Queue[Optional[TrainingBatch]]]" = None
        self._loop: Optional[asyncio.AbstractEventLoop] = None

    # ------------------------------------------
    # Pipeline
    # ------------------------------------------

    def pipeline(self, bandit_id: str) -> RewardPipeline:
        """
        The reward pipeline of a bandit, created on first use.

        Batch numbering resumes after the highest batch the store has applied.
        The flush policy is saved next to the logs for later replays.

        Raises:
            UnknownBandit: If the bandit does not exist.
        """
        with self._lock:
            pipeline = self._pipelines.get(bandit_id)
            if pipeline is None:
                config, params = self.store.snapshot(bandit_id)
                pipeline = RewardPipeline(config, self.flush_policy, params.train_seq + 1)
                self._pipelines[bandit_id] = pipeline
                path = flush_policy_path(self.data_dir, bandit_id)
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_bytes(dumps(self.flush_policy.model_dump(mode="json")))
            return pipeline

    def batch_log(self, bandit_id: str) -> BatchLog:
        """The batch log of a bandit."""
        with self._lock:
            if bandit_id not in self._batch_logs:
                self._batch_logs[bandit_id] = BatchLog(
                    self.data_dir / "logs", bandit_id, fsync=self._fsync
                )
            return self._batch_logs[bandit_id]

    def ingest(self, event: Event) -> List[TrainingBatch]:
        """
        Log an event and feed it to its bandit's pipeline.

        Returns:
            The batches the event completed.

        Raises:
            UnknownBandit: If the event's bandit does not exist.
            SchemaViolation: If the event does not fit the bandit's configuration.
        """
        with self._lock:
            self.events.append(event)
            batches = self.pipeline(event.bandit_id).process(event)
            self._dispatch(batches)
            return batches

    def record_reward(
        self,
        bandit_id: str,
        request_id: str,
        values: Sequence[float],
        click_position: Optional[int] = None,
        timestamp: Optional[float] = None,
    ) -> RewardEvent:
        """Log a reward for an earlier decision; the timestamp defaults to now."""
        with self._lock:
            event = RewardEvent(
                bandit_id=bandit_id,
                request_id=request_id,
                values=list(values),
                click_position=click_position,
                timestamp=self.clock() if timestamp is None else timestamp,
            )
            self.ingest(event)
            return event

    def tick(self, now: Optional[float] = None) -> List[TrainingBatch]:
        """Advance every pipeline's event clock, settling and cutting what is due."""
        with self._lock:
            now = self.clock() if now is None else now
            batches: List[TrainingBatch] = []
            for pipeline in self._pipelines.values():
                batches.extend(pipeline.advance(now))
            self._dispatch(batches)
            return batches

    def close(self) -> List[TrainingBatch]:
        """Settle every pending impression and cut the final batches."""
        with self._lock:
            batches: List[TrainingBatch] = []
            for pipeline in self._pipelines.values():
                batches.extend(pipeline.close())
            self._dispatch(batches)
            return batches

    def _dispatch(self, batches: List[TrainingBatch]) -> None:
        for batch in batches:
            self.batch_log(batch.bandit_id).append(batch)
            if self._queue is not None and self._loop is not None:
                self._loop.call_soon_threadsafe(self._queue.put_nowait, batch)
            else:
                self.trainer.consume(batch)

    # ------------------------------------------
    # Reporting
    # ------------------------------------------

    def join_counters(self) -> JoinCounters:
        """Join counters summed over every pipeline."""
        total = JoinCounters()
        with self._lock:
            for pipeline in self._pipelines.values():
                counters = pipeline.counters
                total.impressions += counters.impressions
                total.examples += counters.examples
                total.dropped_examples += counters.dropped_examples
                total.late_rewards += counters.late_rewards
                total.duplicate_impressions += counters.duplicate_impressions
        return total

    def metrics(self) -> Dict[str, int]:
        """Every counter of the platform by name."""
        join = self.join_counters()
        metrics = dict(self.trainer.metrics.as_dict())
        metrics.update(
            impressions=join.impressions,
            examples=join.examples,
            dropped_examples=join.dropped_examples,
            late_rewards=join.late_rewards,
            duplicate_impressions=join.duplicate_impressions,
            decisions=self.sampler.metrics.decisions,
            cache_hits=self.sampler.metrics.cache_hits,
            refresh_failures=self.sampler.metrics.refresh_failures,
            overloaded=self.sampler.metrics.overloaded,
        )
        return metrics

    # ------------------------------------------
    # Service loops
    # ------------------------------------------

    async def run(self, stop: asyncio.Event, tick_interval: float = 1.0) -> None:
        """
        Run the trainer, snapshot refresher and pipeline clock until ``stop`` is set.

        Batches cut while running go through the trainer queue; pending
        ones are drained before returning.
        """
        self._loop = asyncio.get_running_loop()
        self._queue = asyncio.Queue()
        trainer = asyncio.create_task(self.trainer.run(self._queue))
        refresher = asyncio.create_task(self.sampler.run_refresher(stop))
        logger.info("Platform running on %s", self.data_dir)
        try:
            while not stop.is_set():
                self.tick()
                try:
                    await asyncio.wait_for(stop.wait(), timeout=tick_interval)
                except asyncio.TimeoutError:
                    pass
        finally:
            stop.set()
            await refresher
            self._queue.put_nowait(None)
            await trainer
            self._queue = None
            self._loop = None
            logger.info("Platform stopped")
