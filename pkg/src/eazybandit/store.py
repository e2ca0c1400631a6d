"""The Bandit Store: versioned bandit configurations and parameters with CAS writes."""

import logging
import threading
import time
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

from eazybandit.core import Algorithm, BanditConfig, Status, validate_config
from eazybandit.exceptions import (
    AlreadyFrozen,
    Conflict,
    ImmutableFieldChanged,
    InvalidConfig,
    StoreError,
    UnknownBandit,
)
from eazybandit.journal import Journal
from eazybandit.policies import policy_for

logger = logging.getLogger(__name__)

#: Fields fixed when a bandit is created; learned parameters depend on them.
IMMUTABLE_FIELDS = ("algorithm", "arm_space", "context_schema", "reward_spec")


class ParamDocument(BaseModel):
    """
    One committed version of a bandit's learned parameters.

    Attributes:
        bandit_id: Bandit the parameters belong to.
        version: Commit counter; 0 holds the priors.
        algorithm: Algorithm the state was produced by.
        state: Policy state as encoded by the bandit's policy.
        updated_at: Commit time in seconds.
        train_seq: Highest training batch sequence number applied.
    """

    model_config = ConfigDict(frozen=True)

    bandit_id: str
    version: int = Field(..., ge=0)
    algorithm: Algorithm
    state: Dict[str, Any]
    updated_at: float
    train_seq: int = Field(0, ge=0)


class StoreConfig(BaseModel):
    """
    Pydantic model for the store configuration.

    Args:
        root (Path): Directory holding one ``<bandit_id>.log`` file per bandit.
        compact_every (int): Commits between automatic log compactions.
        fsync (bool): Whether appends are flushed to disk before acknowledging.
    """

    root: Path = Field(..., description="Directory holding the bandit logs.")
    compact_every: int = Field(1000, ge=1, description="Commits between automatic compactions.")
    fsync: bool = Field(True, description="Flush appends to disk before acknowledging.")


class BaseBanditStore(BaseModel, ABC):
    """
    Abstract base class for bandit stores.

    A store keeps every bandit's configuration and its latest committed
    parameter document. Parameter writes go through :meth:`cas_put_params`
    only, so concurrent writers serialise on the stored version.

    Attributes:
        config: Store configuration.
    """

    model_config = ConfigDict(extra="ignore", arbitrary_types_allowed=True)

    config: StoreConfig

    @abstractmethod
    def put_config(self, config: BanditConfig) -> int:
        """
        Create a bandit, or accept an unchanged or compatible resubmission.

        Args:
            config: The bandit's configuration.

        Returns:
            The bandit's current parameter version; 0 for a new bandit.

        Raises:
            InvalidConfig: If the configuration violates an invariant.
            ImmutableFieldChanged: If a resubmission alters a field fixed at creation.
        """
        raise NotImplementedError

    @abstractmethod
    def get_config(self, bandit_id: str) -> BanditConfig:
        """
        Fetch a bandit's configuration.

        Raises:
            UnknownBandit: If the bandit does not exist.
        """
        raise NotImplementedError

    @abstractmethod
    def get_params(self, bandit_id: str) -> ParamDocument:
        """
        Fetch the latest committed parameter document.

        Raises:
            UnknownBandit: If the bandit does not exist.
            StoreError: If the store cannot be read.
        """
        raise NotImplementedError

    @abstractmethod
    def cas_put_params(
        self, bandit_id: str, expected_version: int, new_state: Dict[str, Any], train_seq: int
    ) -> int:
        """
        Commit new parameters if nobody else committed first.

        Args:
            bandit_id: Bandit to write.
            expected_version: Version the new state was derived from.
            new_state: Encoded policy state.
            train_seq: Sequence number of the batch that produced the state.

        Returns:
            The new version, ``expected_version + 1``.

        Raises:
            UnknownBandit: If the bandit does not exist.
            Conflict: If the version moved on, ``train_seq`` is stale or the bandit is frozen.
        """
        raise NotImplementedError

    @abstractmethod
    def freeze(self, bandit_id: str) -> int:
        """
        Stop learning: flip the bandit's status to Frozen.

        Returns:
            The new configuration version.

        Raises:
            UnknownBandit: If the bandit does not exist.
            AlreadyFrozen: If the bandit is already frozen.
        """
        raise NotImplementedError

    @abstractmethod
    def list_bandits(self) -> List[str]:
        """Return the ids of every stored bandit, sorted."""
        raise NotImplementedError

    def snapshot(self, bandit_id: str) -> Tuple[BanditConfig, ParamDocument]:
        """
        Fetch configuration and parameters together.

        Raises:
            UnknownBandit: If the bandit does not exist.
        """
        return self.get_config(bandit_id), self.get_params(bandit_id)


class _Entry:
    """In-memory view of one bandit; replaced wholesale on every write."""

    __slots__ = ("config", "config_version", "params")

    def __init__(self, config: BanditConfig, config_version: int, params: ParamDocument) -> None:
        self.config = config
        self.config_version = config_version
        self.params = params


class FileBanditStore(BaseBanditStore):
    """Bandit store over one append-only journal per bandit.

    Every configuration change and parameter commit is appended to
    ``<root>/<bandit_id>.log`` before it becomes visible. An in-memory index
    holds the latest entry per bandit; readers take the current entry
    reference without locking, writers serialise on a per-bandit lock.

    Usage:
        ```
        store = FileBanditStore(config=StoreConfig(root="data/store"))
        store.put_config(config)
        doc = store.get_params(config.bandit_id)
        ```

    Attributes:
        config: Store configuration.
        clock: Source of commit timestamps.
    """

    clock: Callable[[], float] = time.time

    _entries: Dict[str, _Entry] = PrivateAttr(default_factory=dict)
    _journals: Dict[str, Journal] = PrivateAttr(default_factory=dict)
    _locks: Dict[str, threading.Lock] = PrivateAttr(default_factory=dict)
    _registry_lock: threading.Lock = PrivateAttr(default_factory=threading.Lock)
    _commits: Dict[str, int] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context: Any) -> None:  # noqa: D102
        try:
            self.config.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StoreError(f"Cannot create store directory {self.config.root}: {e}") from e
        for path in sorted(self.config.root.glob("*.log")):
            self._load(path)

    def _load(self, path: Path) -> None:
        journal = Journal(path, fsync=self.config.fsync)
        config: Optional[BanditConfig] = None
        config_version = -1
        params: Optional[ParamDocument] = None
        for _, record in journal.read_from(0):
            if record["type"] == "config":
                config = BanditConfig.model_validate(record["config"])
                config_version = record["config_version"]
            elif record["type"] == "params":
                params = ParamDocument.model_validate(record["doc"])
        if config is None or params is None:
            logger.warning("Ignoring incomplete bandit log %s", path)
            return
        self._journals[config.bandit_id] = journal
        self._locks[config.bandit_id] = threading.Lock()
        self._entries[config.bandit_id] = _Entry(config, config_version, params)
        self._commits[config.bandit_id] = 0

    def _entry(self, bandit_id: str) -> _Entry:
        try:
            return self._entries[bandit_id]
        except KeyError:
            raise UnknownBandit(bandit_id)

    def put_config(self, config: BanditConfig) -> int:  # noqa: D102
        violations = validate_config(config)
        if violations:
            raise InvalidConfig(violations)
        bandit_id = config.bandit_id
        with self._registry_lock:
            if bandit_id not in self._locks:
                self._locks[bandit_id] = threading.Lock()
        with self._locks[bandit_id]:
            existing = self._entries.get(bandit_id)
            if existing is None:
                return self._create(config)

            changed = [
                name
                for name in IMMUTABLE_FIELDS
                if getattr(existing.config, name) != getattr(config, name)
            ]
            if changed:
                raise ImmutableFieldChanged(bandit_id, changed)
            # status is owned by the store; only freeze() changes it
            resubmitted = config.model_copy(update={"status": existing.config.status})
            if resubmitted == existing.config:
                return existing.params.version
            journal = self._journals[bandit_id]
            journal.append(
                {
                    "type": "config",
                    "config_version": existing.config_version + 1,
                    "config": resubmitted.model_dump(mode="json"),
                }
            )
            self._entries[bandit_id] = _Entry(
                resubmitted, existing.config_version + 1, existing.params
            )
            logger.info("Updated mutable settings of bandit %s", bandit_id)
            return existing.params.version

    def _create(self, config: BanditConfig) -> int:
        policy = policy_for(config)
        params = ParamDocument(
            bandit_id=config.bandit_id,
            version=0,
            algorithm=config.algorithm,
            state=policy.encode(policy.initial_state()),
            updated_at=self.clock(),
            train_seq=0,
        )
        journal = Journal(self.config.root / f"{config.bandit_id}.log", fsync=self.config.fsync)
        journal.rewrite(
            [
                {"type": "config", "config_version": 0, "config": config.model_dump(mode="json")},
                {"type": "params", "doc": params.model_dump(mode="json")},
            ]
        )
        self._journals[config.bandit_id] = journal
        self._commits[config.bandit_id] = 0
        self._entries[config.bandit_id] = _Entry(config, 0, params)
        logger.info("Created bandit %s (%s)", config.bandit_id, config.algorithm.value)
        return 0

    def get_config(self, bandit_id: str) -> BanditConfig:  # noqa: D102
        return self._entry(bandit_id).config

    def config_version(self, bandit_id: str) -> int:
        """Number of configuration changes since creation."""
        return self._entry(bandit_id).config_version

    def get_params(self, bandit_id: str) -> ParamDocument:  # noqa: D102
        return self._entry(bandit_id).params

    def snapshot(self, bandit_id: str) -> Tuple[BanditConfig, ParamDocument]:
        """Configuration and parameters read from one consistent entry."""
        entry = self._entry(bandit_id)
        return entry.config, entry.params

    def cas_put_params(  # noqa: D102
        self, bandit_id: str, expected_version: int, new_state: Dict[str, Any], train_seq: int
    ) -> int:
        self._entry(bandit_id)
        with self._locks[bandit_id]:
            entry = self._entries[bandit_id]
            if entry.config.is_frozen:
                raise Conflict(bandit_id, Conflict.FROZEN, f"Bandit {bandit_id} is frozen")
            if entry.params.version != expected_version:
                raise Conflict(
                    bandit_id,
                    Conflict.VERSION,
                    f"Bandit {bandit_id} is at version {entry.params.version}, "
                    f"not {expected_version}",
                )
            if train_seq <= entry.params.train_seq:
                raise Conflict(
                    bandit_id,
                    Conflict.STALE_TRAIN_SEQ,
                    f"Batch {train_seq} of bandit {bandit_id} was already applied "
                    f"(train_seq {entry.params.train_seq})",
                )
            params = ParamDocument(
                bandit_id=bandit_id,
                version=expected_version + 1,
                algorithm=entry.config.algorithm,
                state=new_state,
                updated_at=self.clock(),
                train_seq=train_seq,
            )
            self._journals[bandit_id].append(
                {"type": "params", "doc": params.model_dump(mode="json")}
            )
            self._entries[bandit_id] = _Entry(entry.config, entry.config_version, params)
            self._commits[bandit_id] += 1
            if self._commits[bandit_id] >= self.config.compact_every:
                self._compact_locked(bandit_id)
            return params.version

    def freeze(self, bandit_id: str) -> int:  # noqa: D102
        self._entry(bandit_id)
        with self._locks[bandit_id]:
            entry = self._entries[bandit_id]
            if entry.config.is_frozen:
                raise AlreadyFrozen(bandit_id)
            frozen = entry.config.model_copy(update={"status": Status.FROZEN})
            self._journals[bandit_id].append(
                {
                    "type": "config",
                    "config_version": entry.config_version + 1,
                    "config": frozen.model_dump(mode="json"),
                }
            )
            self._entries[bandit_id] = _Entry(frozen, entry.config_version + 1, entry.params)
            logger.info("Froze bandit %s at parameter version %d", bandit_id, entry.params.version)
            return entry.config_version + 1

    def list_bandits(self) -> List[str]:  # noqa: D102
        return sorted(self._entries)

    def compact(self, bandit_id: str) -> None:
        """
        Rewrite a bandit's log to its latest configuration and parameter records.

        Raises:
            UnknownBandit: If the bandit does not exist.
            StoreError: If the log cannot be rewritten.
        """
        self._entry(bandit_id)
        with self._locks[bandit_id]:
            self._compact_locked(bandit_id)

    def _compact_locked(self, bandit_id: str) -> None:
        entry = self._entries[bandit_id]
        self._journals[bandit_id].rewrite(
            [
                {
                    "type": "config",
                    "config_version": entry.config_version,
                    "config": entry.config.model_dump(mode="json"),
                },
                {"type": "params", "doc": entry.params.model_dump(mode="json")},
            ]
        )
        self._commits[bandit_id] = 0
        logger.info("Compacted log of bandit %s at version %d", bandit_id, entry.params.version)
