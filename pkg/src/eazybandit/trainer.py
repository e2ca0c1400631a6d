"""The Trainer: folds training batches into policy state and commits it to the store."""

import asyncio
import logging
from dataclasses import asdict, dataclass
from typing import Any, AsyncIterator, Dict, Optional, Union

from eazybandit.core import BanditConfig
from eazybandit.events import TrainingBatch
from eazybandit.exceptions import BatchMismatch, Conflict, TrainerError
from eazybandit.pipeline import BatchLog
from eazybandit.policies import ApplyResult, Policy, policy_for
from eazybandit.store import BaseBanditStore

logger = logging.getLogger(__name__)

BatchSource = Union["asyncio.Queue[Optional[TrainingBatch]]", AsyncIterator[TrainingBatch]]


@dataclass
class TrainerMetrics:
    """Counters published on the service's metrics endpoint."""

    applied_batches: int = 0
    poisoned_examples: int = 0
    dropped_frozen: int = 0
    cas_conflicts: int = 0
    skipped_replays: int = 0
    failed_batches: int = 0

    def as_dict(self) -> Dict[str, int]:
        """Counters by name."""
        return asdict(self)


def apply_batch(
    state: Any, config: BanditConfig, batch: TrainingBatch, policy: Optional[Policy] = None
) -> ApplyResult:
    """
    Fold a batch into a policy state.

    Examples apply in list order. An example the policy rejects is skipped and
    reported in the result instead of failing the batch.

    Args:
        state: State the batch applies to.
        config: Configuration of the bandit.
        batch: The batch.
        policy: Policy of the bandit, built from the configuration when omitted.

    Returns:
        The folded state with applied and poisoned counts.

    Raises:
        BatchMismatch: If the batch belongs to another bandit.
        AlgorithmMismatch: If the state does not belong to the configured algorithm.
    """
    if batch.bandit_id != config.bandit_id:
        raise BatchMismatch(f"Batch for {batch.bandit_id} handed to {config.bandit_id}")
    policy = policy or policy_for(config)
    policy.check_state(state)
    return policy.apply(state, batch.examples)


class Trainer:
    """
    Applies batches to the store with replay safety.

    For each batch the latest parameters are read; a batch whose ``seq`` is
    not above the stored ``train_seq`` was already applied and is skipped.
    Otherwise the batch is applied and committed with compare-and-swap. A
    version conflict is retried once against fresh parameters; a second one
    fails the batch loudly. Commits rejected because the bandit is frozen are
    counted and dropped.

    Attributes:
        store: Where parameters are read from and committed to.
        metrics: Running counters.
    """

    def __init__(self, store: BaseBanditStore) -> None:
        self.store = store
        self.metrics = TrainerMetrics()
        self._policies: Dict[str, Policy] = {}

    def policy(self, config: BanditConfig) -> Policy:
        """Cached policy for a configuration."""
        cached = self._policies.get(config.bandit_id)
        if cached is None or cached.config != config:
            cached = policy_for(config)
            self._policies[config.bandit_id] = cached
        return cached

    def handle(self, batch: TrainingBatch) -> Optional[int]:
        """
        Apply and commit one batch.

        Returns:
            The committed version, or ``None`` when the batch was skipped or dropped.

        Raises:
            UnknownBandit: If the batch's bandit does not exist.
            TrainerError: If the commit conflicts twice.
        """
        for attempt in range(2):
            config, params = self.store.snapshot(batch.bandit_id)
            if batch.seq <= params.train_seq:
                self.metrics.skipped_replays += 1
                logger.info(
                    "Skipping replayed batch %d of %s (train_seq %d)",
                    batch.seq,
                    batch.bandit_id,
                    params.train_seq,
                )
                return None
            policy = self.policy(config)
            result = apply_batch(policy.decode(params.state), config, batch, policy)
            try:
                version = self.store.cas_put_params(
                    batch.bandit_id, params.version, policy.encode(result.state), batch.seq
                )
            except Conflict as e:
                if e.reason == Conflict.FROZEN:
                    self.metrics.dropped_frozen += 1
                    logger.info("Dropping batch %d of frozen %s", batch.seq, batch.bandit_id)
                    return None
                self.metrics.cas_conflicts += 1
                logger.warning(
                    "Commit of batch %d for %s conflicted: %s", batch.seq, batch.bandit_id, e
                )
                if attempt == 0:
                    continue
                self.metrics.failed_batches += 1
                logger.error("Giving up on batch %d of %s", batch.seq, batch.bandit_id)
                raise TrainerError(
                    f"Batch {batch.seq} of {batch.bandit_id} conflicted twice"
                ) from e
            self.metrics.applied_batches += 1
            self.metrics.poisoned_examples += len(result.poisoned)
            logger.info(
                "Committed batch %d of %s as version %d (%d applied, %d poisoned)",
                batch.seq,
                batch.bandit_id,
                version,
                result.applied,
                len(result.poisoned),
            )
            return version
        return None  # pragma: no cover

    async def run(self, source: BatchSource) -> None:
        """
        Service loop: apply batches as they arrive.

        A queue source ends the loop with a ``None`` sentinel; an async
        iterator ends it by finishing. Failures are logged and counted, and
        the loop carries on with the next batch.
        """
        if isinstance(source, asyncio.Queue):
            while True:
                batch = await source.get()
                if batch is None:
                    return
                self.consume(batch)
        else:
            async for batch in source:
                self.consume(batch)

    def consume(self, batch: TrainingBatch) -> None:
        """Handle a batch, logging and counting failures instead of raising."""
        try:
            self.handle(batch)
        except TrainerError:
            pass
        except Exception:
            self.metrics.failed_batches += 1
            logger.exception("Batch %d of %s failed", batch.seq, batch.bandit_id)

    def drain(self, log: BatchLog, offset: int = 0) -> int:
        """
        Apply every batch of a batch log from ``offset`` on.

        Returns:
            The offset to resume from.
        """
        for index, batch in log.read_from(offset):
            self.consume(batch)
            offset = index + 1
        return offset

    async def follow(self, log: BatchLog, offset: int = 0, poll_interval: float = 1.0) -> None:
        """Tail a batch log forever, applying batches as they are appended."""
        while True:
            offset = self.drain(log, offset)
            await asyncio.sleep(poll_interval)
