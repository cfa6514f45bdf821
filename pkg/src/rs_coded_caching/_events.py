"""JSON-lines event log of pool joins and leaves."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from rs_coded_caching.enums import ChurnOp
from rs_coded_caching.exceptions import EventLogError

if TYPE_CHECKING:
    from collections.abc import Iterable
    from os import PathLike

    from numpy.typing import NDArray

DIGEST_SIZE = 8
"""BLAKE2b digest size in bytes; digests are written as 16 hex characters."""


def loads_digest(loads: NDArray[np.int64]) -> str:
    """Hash a load vector, independent of platform byte order."""
    data = np.ascontiguousarray(loads, dtype="<i8").tobytes()
    return hashlib.blake2b(data, digest_size=DIGEST_SIZE).hexdigest()


@dataclass(frozen=True, kw_only=True)
class ChurnEvent:
    """One join or leave, with the load vector digest after it."""

    op: ChurnOp
    user: int
    choices: tuple[int, ...] | None = None
    """Sampled virtual users, first draw first. None for leaves."""

    chosen: int | None = None
    """The virtual user joined. None for leaves."""

    loads_digest: str

    def to_json(self) -> dict[str, Any]:
        """The event as a JSON-ready dict."""
        return {
            "op": self.op.value,
            "user": self.user,
            "choices": list(self.choices) if self.choices is not None else None,
            "chosen": self.chosen,
            "loads_digest": self.loads_digest,
        }

    @classmethod
    def from_json(cls, record: dict[str, Any]) -> ChurnEvent:
        """Parse a JSON record.

        Raises:
            KeyError, ValueError, TypeError: If the record is malformed.

        """
        op = ChurnOp(record["op"])
        choices = record.get("choices")
        chosen = record.get("chosen")
        if op == ChurnOp.JOIN and (choices is None or chosen is None):
            raise ValueError("Join events need choices and chosen")
        return cls(
            op=op,
            user=int(record["user"]),
            choices=tuple(int(c) for c in choices) if choices is not None else None,
            chosen=int(chosen) if chosen is not None else None,
            loads_digest=str(record["loads_digest"]),
        )


@dataclass(frozen=True, kw_only=True)
class EventLog:
    """A parsed event log."""

    num_virtual_users: int
    """K', from the log header."""

    population_cap: int
    """K_cap, from the log header."""

    events: tuple[tuple[int, ChurnEvent], ...] = ()
    """Events paired with their 1-based line numbers."""

    @property
    def num_joins(self) -> int:
        """The number of join events."""
        return sum(1 for _, event in self.events if event.op == ChurnOp.JOIN)


def write_event_log(
    path: str | PathLike[str],
    events: Iterable[ChurnEvent],
    *,
    num_virtual_users: int,
    population_cap: int,
) -> None:
    """Write a header line followed by one line per event."""
    header = {
        "op": "open",
        "num_virtual_users": num_virtual_users,
        "population_cap": population_cap,
    }
    with Path(path).open("w") as f:
        f.write(json.dumps(header) + "\n")
        for event in events:
            f.write(json.dumps(event.to_json()) + "\n")


def read_event_log(path: str | PathLike[str]) -> EventLog:
    """Parse an event log written by `write_event_log`.

    Raises:
        EventLogError: On a missing header or malformed line, with its line number.

    """
    header: dict[str, Any] | None = None
    events: list[tuple[int, ChurnEvent]] = []
    with Path(path).open() as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise EventLogError(f"Invalid JSON: {err}", line=line_no) from err

            if header is None:
                if not isinstance(record, dict) or record.get("op") != "open":
                    raise EventLogError("Expected an 'open' header", line=line_no)
                header = record
                continue

            try:
                events.append((line_no, ChurnEvent.from_json(record)))
            except (KeyError, ValueError, TypeError) as err:
                raise EventLogError(f"Malformed event: {err}", line=line_no) from err

    if header is None:
        raise EventLogError(f"Event log {path} has no header")
    try:
        return EventLog(
            num_virtual_users=int(header["num_virtual_users"]),
            population_cap=int(header["population_cap"]),
            events=tuple(events),
        )
    except (KeyError, ValueError, TypeError) as err:
        raise EventLogError(f"Malformed header: {err}", line=1) from err
