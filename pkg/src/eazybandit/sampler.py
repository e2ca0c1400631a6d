"""The decision service: snapshot-backed sampling with session consistency."""

import asyncio
import logging
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Any, Callable, ContextManager, Dict, Mapping, Optional, Tuple

import numpy as np

from eazybandit.core import BanditConfig, Decision, encode_context, parse_config
from eazybandit.events import ImpressionEvent
from eazybandit.exceptions import (
    AlreadyFrozen,
    EazyBanditError,
    Overloaded,
    RefreshFailed,
    UnknownBandit,
)
from eazybandit.policies import Policy, policy_for
from eazybandit.settings import SamplerSettings
from eazybandit.store import BaseBanditStore, ParamDocument

logger = logging.getLogger(__name__)

ImpressionSink = Callable[[ImpressionEvent], Any]


@dataclass(frozen=True)
class Snapshot:
    """One bandit's configuration and decoded parameters, swapped in as a unit."""

    config: BanditConfig
    params: ParamDocument
    policy: Policy
    state: Any
    fetched_at: float

    @property
    def version(self) -> int:
        """Parameter version decisions from this snapshot carry."""
        return self.params.version


class ConsistencyCache:
    """
    Session-keyed decision memo with a time to live and LRU eviction.

    Entries are dropped when read after their expiry; the least recently used
    entry is evicted once ``capacity`` is reached.
    """

    def __init__(self, ttl: float, capacity: int) -> None:
        self.ttl = ttl
        self.capacity = capacity
        self._entries: "OrderedDict[Tuple[str, str], Tuple[Decision, float]]" = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: Tuple[str, str], now: float) -> Optional[Decision]:
        """The live decision for a key, if any."""
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                return None
            decision, expires_at = entry
            if now >= expires_at:
                del self._entries[key]
                return None
            self._entries.move_to_end(key)
            return decision

    def put_if_absent(self, key: Tuple[str, str], decision: Decision, now: float) -> Decision:
        """
        Store a decision unless a live one exists.

        Returns:
            The decision now held for the key; ``decision`` itself when it was stored.
        """
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None and now < entry[1]:
                self._entries.move_to_end(key)
                return entry[0]
            self._entries[key] = (decision, now + self.ttl)
            self._entries.move_to_end(key)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
            return decision

    def purge(self, now: float) -> int:
        """Drop every expired entry; returns how many were dropped."""
        with self._lock:
            expired = [key for key, (_, expires_at) in self._entries.items() if now >= expires_at]
            for key in expired:
                del self._entries[key]
            return len(expired)


@dataclass
class SamplerMetrics:
    """Counters of the decision service."""

    decisions: int = 0
    cache_hits: int = 0
    impressions: int = 0
    refresh_failures: int = 0
    overloaded: int = 0

    def as_dict(self) -> Dict[str, int]:
        """Counters by name."""
        return asdict(self)


class Sampler:
    """
    Serves decisions from cached parameter snapshots.

    A session keeps its decision for ``ttl`` seconds. Snapshots are refreshed
    from the store, fetched on first use and swapped atomically, so a request
    uses exactly one parameter version. Frozen bandits exploit their
    posterior means. Every fresh decision is reported once to the impression
    sink; cache hits are not.

    Decisions are timestamped and reported while holding ``decision_lock``;
    passing the lock that serialises the impression sink keeps impressions
    arriving in timestamp order.

    Attributes:
        store: Source of configurations and parameters.
        settings: Cache and refresh settings.
        clock: Source of decision timestamps in seconds.
        on_impression: Receives the impression of every fresh decision.
    """

    def __init__(
        self,
        store: BaseBanditStore,
        settings: Optional[SamplerSettings] = None,
        rng: Optional[np.random.Generator] = None,
        clock: Callable[[], float] = time.time,
        on_impression: Optional[ImpressionSink] = None,
        request_ids: Optional[Callable[[str], str]] = None,
        decision_lock: Optional[ContextManager[Any]] = None,
    ) -> None:
        self.store = store
        self.settings = settings or SamplerSettings()
        self.clock = clock
        self.on_impression = on_impression
        self.cache = ConsistencyCache(self.settings.ttl, self.settings.capacity)
        self.metrics = SamplerMetrics()
        self._rng = rng if rng is not None else np.random.default_rng()
        self._rng_lock = threading.Lock()
        self._request_ids = request_ids or (lambda _: uuid.uuid4().hex)
        self._snapshots: Dict[str, Snapshot] = {}
        self._in_flight = 0
        self._flight_lock = threading.Lock()
        self._decision_lock = decision_lock or threading.Lock()

    # ------------------------------------------
    # Snapshots
    # ------------------------------------------

    def snapshot(self, bandit_id: str) -> Snapshot:
        """
        The current snapshot of a bandit, fetched on first use.

        Raises:
            UnknownBandit: If the store does not know the bandit.
            RefreshFailed: If the first fetch fails.
        """
        snapshot = self._snapshots.get(bandit_id)
        if snapshot is None:
            self.refresh(bandit_id)
            snapshot = self._snapshots[bandit_id]
        return snapshot

    def refresh(self, bandit_id: str) -> Optional[Snapshot]:
        """
        Fetch the latest parameters and swap the snapshot if they changed.

        Returns:
            The new snapshot, or ``None`` when nothing changed.

        Raises:
            UnknownBandit: If the store does not know the bandit.
            RefreshFailed: If the store cannot be read; the old snapshot stays in service.
        """
        current = self._snapshots.get(bandit_id)
        try:
            config, params = self.store.snapshot(bandit_id)
            if (
                current is not None
                and current.params.version == params.version
                and current.config == config
            ):
                return None
            policy = current.policy if current and current.config == config else policy_for(config)
            state = policy.decode(params.state)
        except UnknownBandit:
            raise
        except (EazyBanditError, OSError) as e:
            self.metrics.refresh_failures += 1
            logger.warning("Refresh of %s failed, serving stale snapshot: %s", bandit_id, e)
            raise RefreshFailed(f"Cannot refresh {bandit_id}: {e}") from e
        snapshot = Snapshot(config, params, policy, state, self.clock())
        self._snapshots[bandit_id] = snapshot
        logger.info("Bandit %s now serving parameter version %d", bandit_id, params.version)
        return snapshot

    def refresh_all(self) -> int:
        """Refresh every cached bandit; returns how many snapshots were swapped."""
        swapped = 0
        for bandit_id in list(self._snapshots):
            try:
                swapped += self.refresh(bandit_id) is not None
            except (RefreshFailed, UnknownBandit):
                continue
        return swapped

    async def run_refresher(self, stop: Optional[asyncio.Event] = None) -> None:
        """Refresh every ``refresh_period`` seconds until ``stop`` is set."""
        stop = stop or asyncio.Event()
        while not stop.is_set():
            self.refresh_all()
            self.cache.purge(self.clock())
            try:
                await asyncio.wait_for(stop.wait(), timeout=self.settings.refresh_period)
            except asyncio.TimeoutError:
                pass

    # ------------------------------------------
    # Decisions
    # ------------------------------------------

    def sample(self, bandit_id: str, session_id: str, raw_context: Mapping[str, Any]) -> Decision:
        """
        Serve a decision for a session.

        Args:
            bandit_id: Bandit to sample from.
            session_id: Session the decision is for.
            raw_context: Feature values keyed by name.

        Returns:
            The session's live decision, or a freshly sampled one.

        Raises:
            UnknownBandit: If the bandit does not exist.
            InvalidContext: If the context does not match the schema.
            Overloaded: If too many requests are in flight.
        """
        with self._flight_lock:
            if self._in_flight >= self.settings.max_in_flight:
                self.metrics.overloaded += 1
                raise Overloaded(f"More than {self.settings.max_in_flight} requests in flight")
            self._in_flight += 1
        try:
            return self._sample(bandit_id, session_id, raw_context)
        finally:
            with self._flight_lock:
                self._in_flight -= 1

    def _sample(self, bandit_id: str, session_id: str, raw_context: Mapping[str, Any]) -> Decision:
        snapshot = self.snapshot(bandit_id)
        with self._decision_lock:
            return self._decide(snapshot, bandit_id, session_id, raw_context)

    def _decide(
        self,
        snapshot: Snapshot,
        bandit_id: str,
        session_id: str,
        raw_context: Mapping[str, Any],
    ) -> Decision:
        now = self.clock()
        key = (bandit_id, session_id)
        cached = self.cache.get(key, now)
        if cached is not None:
            self.metrics.cache_hits += 1
            return cached

        x = encode_context(snapshot.config.context_schema, raw_context)
        policy, state = snapshot.policy, snapshot.state
        with self._rng_lock:
            if snapshot.config.is_frozen:
                choice = policy.exploit(state, x, self._rng)
            else:
                choice = policy.sample(state, x, self._rng, step=snapshot.version)
        decision = Decision(
            bandit_id=bandit_id,
            request_id=self._request_ids(bandit_id),
            session_id=session_id,
            arm=choice.arm,
            param_version=snapshot.version,
            served_at=now,
            probability=choice.probability,
        )
        held = self.cache.put_if_absent(key, decision, now)
        if held is not decision:
            self.metrics.cache_hits += 1
            return held
        self.metrics.decisions += 1
        if self.on_impression is not None:
            self.on_impression(
                ImpressionEvent(
                    bandit_id=bandit_id,
                    request_id=decision.request_id,
                    session_id=session_id,
                    arm=decision.arm,
                    context=x.tolist(),
                    param_version=decision.param_version,
                    timestamp=now,
                    probability=decision.probability,
                )
            )
            self.metrics.impressions += 1
        return decision

    # ------------------------------------------
    # Admin
    # ------------------------------------------

    def admin_create(self, payload: Mapping[str, Any]) -> int:
        """
        Create a bandit from a JSON configuration payload.

        Returns:
            The bandit's parameter version.

        Raises:
            InvalidConfig: If the payload does not parse or violates an invariant.
            ImmutableFieldChanged: If it alters an existing bandit's fixed fields.
        """
        return self.store.put_config(parse_config(payload))

    def admin_freeze(self, bandit_id: str) -> Dict[str, Any]:
        """
        Freeze a bandit; freezing a frozen bandit succeeds with a note.

        Raises:
            UnknownBandit: If the bandit does not exist.
        """
        try:
            self.store.freeze(bandit_id)
            note = None
        except AlreadyFrozen:
            note = "already frozen"
        try:
            self.refresh(bandit_id)
        except RefreshFailed:
            pass
        return {"bandit_id": bandit_id, "status": "Frozen", "note": note}
