"""Append-only files of length-prefixed JSON records."""

import logging
import os
import struct
import threading
from pathlib import Path
from typing import Any, Dict, Iterator, List, Tuple, Union

import orjson

from eazybandit.exceptions import StoreError

logger = logging.getLogger(__name__)

_HEADER = struct.Struct(">I")

#: Serialisation options shared by every record; sorted keys keep replays byte-identical.
JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def dumps(payload: Any) -> bytes:
    """Canonical JSON bytes of a payload."""
    return orjson.dumps(payload, option=JSON_OPTIONS)


def frame(payload: Any) -> bytes:
    """
    Encode one record: a 4-byte big-endian length followed by the JSON payload.

    >>> frame({"a": 1})
    b'\\x00\\x00\\x00\\x07{"a":1}'
    """
    body = dumps(payload)
    return _HEADER.pack(len(body)) + body


def _scan(data: bytes) -> Tuple[List[Dict[str, Any]], int]:
    """Decode whole records; returns them and the byte length they cover."""
    records = []
    position = 0
    while position + _HEADER.size <= len(data):
        (length,) = _HEADER.unpack_from(data, position)
        end = position + _HEADER.size + length
        if end > len(data):
            break
        try:
            records.append(orjson.loads(data[position + _HEADER.size : end]))
        except orjson.JSONDecodeError:
            break
        position = end
    return records, position


class Journal:
    """
    One append-only record file.

    Offsets are record ordinals starting at 0. Opening a journal drops a torn
    trailing record left by an interrupted write, so readers only ever see
    whole records. Appends are serialised by a lock and flushed with
    ``fsync`` before they are acknowledged.

    Attributes:
        path: Location of the file.
    """

    def __init__(self, path: Union[str, Path], fsync: bool = True) -> None:
        self.path = Path(path)
        self.fsync = fsync
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._count = len(self.recover())

    def recover(self) -> List[Dict[str, Any]]:
        """
        Read every whole record, truncating a torn tail.

        Raises:
            StoreError: If the file cannot be read or truncated.
        """
        try:
            data = self.path.read_bytes() if self.path.exists() else b""
            records, good = _scan(data)
            if good < len(data):
                logger.warning(
                    "Dropping %d torn trailing bytes from %s", len(data) - good, self.path
                )
                with open(self.path, "r+b") as handle:
                    handle.truncate(good)
        except OSError as e:
            raise StoreError(f"Cannot recover journal {self.path}: {e}") from e
        return records

    def __len__(self) -> int:
        return self._count

    def append(self, payload: Any) -> int:
        """
        Durably append one record.

        A failed write is cut back to the previous end of file, so later records
        never land behind a partial one.

        Returns:
            The record's offset.

        Raises:
            StoreError: If the write fails.
        """
        record = frame(payload)
        with self._lock:
            try:
                size = self.path.stat().st_size if self.path.exists() else 0
            except OSError as e:
                raise StoreError(f"Cannot append to journal {self.path}: {e}") from e
            try:
                with open(self.path, "ab") as handle:
                    handle.write(record)
                    handle.flush()
                    if self.fsync:
                        os.fsync(handle.fileno())
            except OSError as e:
                self._cut_back(size)
                raise StoreError(f"Cannot append to journal {self.path}: {e}") from e
            offset = self._count
            self._count += 1
            return offset

    def _cut_back(self, size: int) -> None:
        try:
            os.truncate(self.path, size)
        except OSError as e:
            logger.error("Cannot cut %s back to %d bytes: %s", self.path, size, e)

    def read_from(self, offset: int = 0) -> Iterator[Tuple[int, Dict[str, Any]]]:
        """
        Yield ``(offset, record)`` pairs from ``offset`` onwards.

        Raises:
            StoreError: If the file cannot be read.
        """
        try:
            data = self.path.read_bytes() if self.path.exists() else b""
        except OSError as e:
            raise StoreError(f"Cannot read journal {self.path}: {e}") from e
        records, _ = _scan(data)
        for index in range(offset, len(records)):
            yield index, records[index]

    def rewrite(self, payloads: List[Any]) -> None:
        """
        Atomically replace the journal's contents.

        The new records go to a temporary sibling file which then replaces the
        journal, so a crash leaves either the old or the new file whole.
        """
        temporary = self.path.with_suffix(self.path.suffix + ".tmp")
        with self._lock:
            try:
                with open(temporary, "wb") as handle:
                    for payload in payloads:
                        handle.write(frame(payload))
                    handle.flush()
                    if self.fsync:
                        os.fsync(handle.fileno())
                os.replace(temporary, self.path)
            except OSError as e:
                raise StoreError(f"Cannot compact journal {self.path}: {e}") from e
            self._count = len(payloads)
