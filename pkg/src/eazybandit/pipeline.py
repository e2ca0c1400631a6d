"""The reward pipeline: clickstream logs, the windowed reward join and batch emission."""

import logging
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from eazybandit.core import BanditConfig, ExplicitArms, RewardKind, SlottedArms
from eazybandit.events import ImpressionEvent, RewardEvent, TrainingBatch, TrainingExample
from eazybandit.exceptions import SchemaViolation, UnknownBandit
from eazybandit.journal import Journal, dumps

logger = logging.getLogger(__name__)

Event = Union[ImpressionEvent, RewardEvent]


class FlushPolicy(BaseModel):
    """
    When buffered examples become a training batch.

    Args:
        max_examples (int): Batch size that triggers a flush.
        max_wait (float): Event-time seconds the oldest buffered example may wait.
    """

    model_config = ConfigDict(frozen=True)

    max_examples: int = Field(100, ge=1)
    max_wait: float = Field(60.0, gt=0.0)


# ------------------------------------------
# Event validation
# ------------------------------------------


def _check_arm(config: BanditConfig, arm: str) -> None:
    space = config.arm_space
    if isinstance(space, ExplicitArms):
        if arm not in space.arm_ids:
            raise SchemaViolation(f"Arm {arm!r} is not part of bandit {config.bandit_id}")
        return
    assert isinstance(space, SlottedArms)
    try:
        space.assignment(arm)
    except ValueError:
        raise SchemaViolation(f"Arm {arm!r} is not part of bandit {config.bandit_id}")


def validate_event(config: BanditConfig, event: Event) -> None:
    """
    Check an event against its bandit's configuration.

    Raises:
        SchemaViolation: If the event does not fit the configuration.
    """
    if event.bandit_id != config.bandit_id:
        raise SchemaViolation(f"Event for {event.bandit_id} routed to {config.bandit_id}")
    if not math.isfinite(event.timestamp):
        raise SchemaViolation("Event timestamp must be finite")

    if isinstance(event, ImpressionEvent):
        if config.algorithm.is_ranking:
            if isinstance(event.arm, str) or len(event.arm) != config.hyperparameters.ranking_k:
                raise SchemaViolation(
                    f"Ranking impressions carry {config.hyperparameters.ranking_k} arms"
                )
            if len(set(event.arm)) != len(event.arm):
                raise SchemaViolation("Ranking impressions carry distinct arms")
            for arm in event.arm:
                _check_arm(config, arm)
        elif not isinstance(event.arm, str):
            raise SchemaViolation("Impressions of non-ranking bandits carry a single arm")
        else:
            _check_arm(config, event.arm)
        if len(event.context) != config.context_dim:
            raise SchemaViolation(
                f"Context of dimension {len(event.context)}, expected {config.context_dim}"
            )
        if not all(math.isfinite(v) for v in event.context):
            raise SchemaViolation("Context values must be finite")
        return

    spec = config.reward_spec
    if len(event.values) != spec.num_objectives:
        raise SchemaViolation(
            f"Reward carries {len(event.values)} values, expected {spec.num_objectives}"
        )
    if not all(math.isfinite(v) for v in event.values):
        raise SchemaViolation("Reward values must be finite")
    if spec.kind is RewardKind.BINARY and any(v not in (0.0, 1.0) for v in event.values):
        raise SchemaViolation(f"Binary bandit {config.bandit_id} got reward {event.values}")
    if event.click_position is not None:
        if not config.algorithm.is_ranking:
            raise SchemaViolation("Click positions only apply to ranking bandits")
        if not 0 <= event.click_position < config.hyperparameters.ranking_k:
            raise SchemaViolation(f"Click position {event.click_position} outside the ranking")


# ------------------------------------------
# Clickstream
# ------------------------------------------


class EventLog:
    """
    Per-bandit append-only impression and reward logs.

    Files live under ``root`` as ``<bandit_id>.impressions.log`` and
    ``<bandit_id>.rewards.log``. Offsets count records per file.

    Attributes:
        root: Directory of the log files.
        configs: Resolves a bandit id to its configuration, raising
            :class:`UnknownBandit` for unknown ids.
    """

    def __init__(
        self, root: Union[str, Path], configs: Callable[[str], BanditConfig], fsync: bool = False
    ) -> None:
        self.root = Path(root)
        self.configs = configs
        self.fsync = fsync
        self._journals: Dict[Tuple[str, str], Journal] = {}
        self._lock = threading.Lock()

    def journal(self, bandit_id: str, kind: str) -> Journal:
        """The journal holding one kind of event for a bandit."""
        key = (bandit_id, kind)
        with self._lock:
            if key not in self._journals:
                suffix = "impressions" if kind == "impression" else "rewards"
                self._journals[key] = Journal(
                    self.root / f"{bandit_id}.{suffix}.log", fsync=self.fsync
                )
            return self._journals[key]

    def append(self, event: Event) -> int:
        """
        Validate and durably append an event.

        Returns:
            The event's offset in its log.

        Raises:
            UnknownBandit: If the event's bandit does not exist.
            SchemaViolation: If the event does not fit the bandit's configuration.
        """
        config = self.configs(event.bandit_id)
        validate_event(config, event)
        return self.journal(event.bandit_id, event.kind).append(event.model_dump(mode="json"))

    def events(self, bandit_id: str) -> List[Event]:
        """
        Every logged event of a bandit in processing order.

        Events are merged by timestamp; at equal timestamps impressions come
        before rewards and each log keeps its offset order.
        """
        keyed: List[Tuple[float, int, int, Event]] = []
        for offset, record in self.journal(bandit_id, "impression").read_from(0):
            keyed.append((record["timestamp"], 0, offset, ImpressionEvent.model_validate(record)))
        for offset, record in self.journal(bandit_id, "reward").read_from(0):
            keyed.append((record["timestamp"], 1, offset, RewardEvent.model_validate(record)))
        keyed.sort(key=lambda item: item[:3])
        return [event for *_, event in keyed]


# ------------------------------------------
# Windowed reward join
# ------------------------------------------


@dataclass
class JoinCounters:
    """Totals reconciling impressions with what became of them."""

    impressions: int = 0
    examples: int = 0
    dropped_examples: int = 0
    late_rewards: int = 0
    duplicate_impressions: int = 0


@dataclass
class _Pending:
    impression: ImpressionEvent
    reward: Optional[List[float]] = None
    click_position: Optional[int] = None
    clicked: bool = False


class RewardJoiner:
    """
    Event-time join of rewards onto impressions by ``request_id``.

    A reward counts when it arrives within ``window`` seconds of its
    impression. An impression is settled once the high-water timestamp passes
    ``impression.timestamp + window``: it becomes an example with its
    aggregated reward, or with the default reward when none arrived (Binary:
    0, rankings: no click); Continuous and MultiObjective impressions without
    reward are dropped. Rewards for settled or unknown requests are counted as
    late and discarded. An impression reusing a pending request_id is counted
    and discarded; the first one keeps its rewards.
    """

    def __init__(self, config: BanditConfig) -> None:
        self.config = config
        self.window = config.attribution_window
        self.watermark = -math.inf
        self.counters = JoinCounters()
        self._pending: "OrderedDict[str, _Pending]" = OrderedDict()

    def observe(self, event: Event) -> List[TrainingExample]:
        """Process one event; returns the examples it settles."""
        settled = self.advance(event.timestamp)
        if isinstance(event, ImpressionEvent):
            if event.request_id in self._pending:
                self.counters.duplicate_impressions += 1
                logger.warning("Discarding duplicate impression %s", event.request_id)
            else:
                self.counters.impressions += 1
                self._pending[event.request_id] = _Pending(event)
        else:
            self._attach(event)
        return settled

    def advance(self, now: float) -> List[TrainingExample]:
        """Raise the watermark to ``now`` and settle every impression that expired."""
        self.watermark = max(self.watermark, now)
        settled = []
        while self._pending:
            request_id, pending = next(iter(self._pending.items()))
            if pending.impression.timestamp + self.window >= self.watermark:
                break
            del self._pending[request_id]
            example = self._settle(pending)
            if example is not None:
                settled.append(example)
        return settled

    def flush(self) -> List[TrainingExample]:
        """Settle every pending impression, as at the end of a log."""
        settled = []
        while self._pending:
            _, pending = self._pending.popitem(last=False)
            example = self._settle(pending)
            if example is not None:
                settled.append(example)
        return settled

    @property
    def pending(self) -> int:
        """Impressions still inside their attribution window."""
        return len(self._pending)

    def _attach(self, reward: RewardEvent) -> None:
        pending = self._pending.get(reward.request_id)
        if pending is None or reward.timestamp - pending.impression.timestamp > self.window:
            self.counters.late_rewards += 1
            logger.debug("Discarding late reward for %s", reward.request_id)
            return
        if self.config.algorithm.is_ranking:
            # the first click to arrive decides the position
            if reward.click_position is not None and not pending.clicked:
                pending.clicked = True
                pending.click_position = reward.click_position
            return
        values = list(reward.values)
        if pending.reward is None:
            pending.reward = values
        elif self.config.reward_spec.kind is RewardKind.BINARY:
            pending.reward = [max(a, b) for a, b in zip(pending.reward, values)]
        else:
            pending.reward = [a + b for a, b in zip(pending.reward, values)]

    def _settle(self, pending: _Pending) -> Optional[TrainingExample]:
        impression = pending.impression
        if self.config.algorithm.is_ranking:
            reward = [1.0 if pending.clicked else 0.0]
        elif pending.reward is not None:
            reward = pending.reward
        elif self.config.reward_spec.kind is RewardKind.BINARY:
            reward = [0.0]
        else:
            self.counters.dropped_examples += 1
            return None
        self.counters.examples += 1
        return TrainingExample(
            request_id=impression.request_id,
            context=impression.context,
            arm=impression.arm,
            reward=reward,
            click_position=pending.click_position,
            probability=impression.probability,
            timestamp=impression.timestamp,
        )


def join_window(
    config: BanditConfig, events: Iterable[Event], flush: bool = True
) -> Tuple[List[TrainingExample], JoinCounters]:
    """
    Join a finite event sequence in one go.

    Args:
        config: Configuration of the bandit the events belong to.
        events: Events in processing order.
        flush: Whether to settle impressions still inside their window at the end.

    Returns:
        Settled examples in settlement order and the join counters.
    """
    joiner = RewardJoiner(config)
    examples: List[TrainingExample] = []
    for event in events:
        examples.extend(joiner.observe(event))
    if flush:
        examples.extend(joiner.flush())
    return examples, joiner.counters


# ------------------------------------------
# Batch emission
# ------------------------------------------


class BatchEmitter:
    """
    Group settled examples into training batches.

    A batch is cut when ``max_examples`` examples are buffered or when the
    event clock has moved ``max_wait`` past the oldest buffered example,
    whichever comes first. Sequence numbers are contiguous from ``start_seq``.
    Empty batches are never emitted.
    """

    def __init__(self, bandit_id: str, policy: FlushPolicy, start_seq: int = 1) -> None:
        self.bandit_id = bandit_id
        self.policy = policy
        self.next_seq = start_seq
        self._buffer: List[TrainingExample] = []
        self._opened_at = 0.0

    def add(self, examples: Iterable[TrainingExample], now: float) -> List[TrainingBatch]:
        """Buffer examples settled at event time ``now``; returns batches cut along the way."""
        batches = self.tick(now)
        for example in examples:
            if not self._buffer:
                self._opened_at = now
            self._buffer.append(example)
            if len(self._buffer) >= self.policy.max_examples:
                batches.append(self._cut(now))
        return batches

    def tick(self, now: float) -> List[TrainingBatch]:
        """Cut the buffer if its oldest example has waited ``max_wait``."""
        if self._buffer and now - self._opened_at >= self.policy.max_wait:
            return [self._cut(now)]
        return []

    def flush(self, now: float) -> List[TrainingBatch]:
        """Cut whatever is buffered."""
        return [self._cut(now)] if self._buffer else []

    def _cut(self, now: float) -> TrainingBatch:
        batch = TrainingBatch(
            bandit_id=self.bandit_id,
            seq=self.next_seq,
            examples=self._buffer,
            window=(self._opened_at, now),
        )
        self.next_seq += 1
        self._buffer = []
        return batch


def emit_batches(
    bandit_id: str,
    examples: Iterable[Tuple[float, TrainingExample]],
    flush_policy: FlushPolicy,
    start_seq: int = 1,
) -> Iterator[TrainingBatch]:
    """
    Batch timestamped examples according to a flush policy.

    Args:
        bandit_id: Bandit the examples belong to.
        examples: ``(settled_at, example)`` pairs in settlement order.
        flush_policy: Size and wait bounds.
        start_seq: Sequence number of the first batch.

    Yields:
        Training batches with contiguous sequence numbers.
    """
    emitter = BatchEmitter(bandit_id, flush_policy, start_seq)
    now = -math.inf
    for settled_at, example in examples:
        now = max(now, settled_at)
        yield from emitter.add([example], now)
    yield from emitter.flush(now)


# ------------------------------------------
# Pipeline
# ------------------------------------------


class RewardPipeline:
    """
    The join and batching stages for one bandit, fed event by event.

    Feeding the same events in the same order always yields the same batches,
    so :func:`replay` can re-derive a run's batches from its logs.
    """

    def __init__(
        self, config: BanditConfig, flush_policy: FlushPolicy, start_seq: int = 1
    ) -> None:
        self.config = config
        self.joiner = RewardJoiner(config)
        self.emitter = BatchEmitter(config.bandit_id, flush_policy, start_seq)

    @property
    def counters(self) -> JoinCounters:
        """Join counters of this pipeline."""
        return self.joiner.counters

    def process(self, event: Event) -> List[TrainingBatch]:
        """Feed one event; returns the batches it completes."""
        settled = self.joiner.observe(event)
        return self.emitter.add(settled, self.joiner.watermark)

    def advance(self, now: float) -> List[TrainingBatch]:
        """Move the event clock without an event, settling and cutting what is due."""
        settled = self.joiner.advance(now)
        return self.emitter.add(settled, self.joiner.watermark)

    def close(self) -> List[TrainingBatch]:
        """Settle everything and cut the final batch."""
        settled = self.joiner.flush()
        now = self.joiner.watermark if math.isfinite(self.joiner.watermark) else 0.0
        batches = self.emitter.add(settled, now)
        return batches + self.emitter.flush(now)


def replay(
    log: EventLog, config: BanditConfig, flush_policy: FlushPolicy
) -> Tuple[List[TrainingBatch], JoinCounters]:
    """
    Re-derive a bandit's training batches from its event logs.

    Returns:
        The batches and the join counters of the replayed run.

    Raises:
        UnknownBandit: If the bandit has no logs.
    """
    if not log.journal(config.bandit_id, "impression").path.exists():
        raise UnknownBandit(config.bandit_id)
    pipeline = RewardPipeline(config, flush_policy)
    batches: List[TrainingBatch] = []
    for event in log.events(config.bandit_id):
        batches.extend(pipeline.process(event))
    batches.extend(pipeline.close())
    return batches, pipeline.counters


def batch_bytes(batches: Iterable[TrainingBatch]) -> List[bytes]:
    """Canonical serialisation of batches, for byte-level comparison."""
    return [dumps(batch.model_dump(mode="json")) for batch in batches]


class BatchLog:
    """The ``<bandit_id>.batches.log`` handoff between pipeline and a decoupled trainer."""

    def __init__(self, root: Union[str, Path], bandit_id: str, fsync: bool = False) -> None:
        self.bandit_id = bandit_id
        self.journal = Journal(Path(root) / f"{bandit_id}.batches.log", fsync=fsync)

    def append(self, batch: TrainingBatch) -> int:
        """Append one batch; returns its offset."""
        return self.journal.append(batch.model_dump(mode="json"))

    def read_from(self, offset: int = 0) -> Iterator[Tuple[int, TrainingBatch]]:
        """Yield ``(offset, batch)`` pairs from ``offset`` onwards."""
        for index, record in self.journal.read_from(offset):
            yield index, TrainingBatch.model_validate(record)


__all__ = [
    "BatchEmitter",
    "BatchLog",
    "Event",
    "EventLog",
    "FlushPolicy",
    "JoinCounters",
    "RewardJoiner",
    "RewardPipeline",
    "batch_bytes",
    "emit_batches",
    "join_window",
    "replay",
    "validate_event",
]
