"""Tests for the pool event log."""

from __future__ import annotations

import json
from typing import TYPE_CHECKING

import numpy as np
import pytest

from rs_coded_caching import (
    ChurnEvent,
    VirtualPool,
    read_event_log,
    write_event_log,
)
from rs_coded_caching._events import loads_digest
from rs_coded_caching.enums import ChurnOp
from rs_coded_caching.exceptions import EventLogError

if TYPE_CHECKING:
    from pathlib import Path


def _write_lines(path: Path, *records: object) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


HEADER = {"op": "open", "num_virtual_users": 3, "population_cap": 8}


class TestLoadsDigest:
    """Tests for loads_digest()."""

    def test_hex_length(self) -> None:
        assert len(loads_digest(np.zeros(4, dtype=np.int64))) == 16

    def test_independent_of_input_dtype(self) -> None:
        loads = [3, 0, 2]
        assert loads_digest(np.array(loads, dtype=np.int32)) == loads_digest(
            np.array(loads, dtype=np.int64),
        )

    def test_sensitive_to_order(self) -> None:
        assert loads_digest(np.array([1, 0])) != loads_digest(np.array([0, 1]))


class TestEventLog:
    """Tests for writing and reading event logs."""

    def test_pool_events_survive_a_file(self, tmp_path: Path) -> None:
        pool = VirtualPool.detached(num_virtual_users=3, population_cap=8)
        pool.admit([0, 2])
        pool.admit([0, 1])
        pool.remove(0)
        assert pool.events is not None
        path = tmp_path / "events.jsonl"
        write_event_log(path, pool.events, num_virtual_users=3, population_cap=8)

        log = read_event_log(path)
        assert log.num_virtual_users == 3
        assert log.population_cap == 8
        assert log.num_joins == 2
        assert [line for line, _ in log.events] == [2, 3, 4]
        assert [event for _, event in log.events] == pool.events

    def test_header_is_first_line(self, tmp_path: Path) -> None:
        path = tmp_path / "events.jsonl"
        write_event_log(path, [], num_virtual_users=5, population_cap=2)
        first = json.loads(path.read_text().splitlines()[0])
        assert first == {"op": "open", "num_virtual_users": 5, "population_cap": 2}

    def test_leave_has_no_choices(self) -> None:
        event = ChurnEvent(op=ChurnOp.LEAVE, user=4, loads_digest="00")
        record = event.to_json()
        assert record["choices"] is None
        assert record["chosen"] is None
        assert ChurnEvent.from_json(record) == event

    def test_blank_lines_keep_numbering(self, tmp_path: Path) -> None:
        path = tmp_path / "events.jsonl"
        leave = {"op": "leave", "user": 0, "loads_digest": "ab"}
        path.write_text(json.dumps(HEADER) + "\n\n" + json.dumps(leave) + "\n")
        ((line, event),) = read_event_log(path).events
        assert line == 3
        assert event.op == ChurnOp.LEAVE


class TestEventLogErrors:
    """Tests for malformed event logs."""

    def test_no_header(self, tmp_path: Path) -> None:
        path = _write_lines(tmp_path / "e.jsonl", {"op": "leave", "user": 0})
        with pytest.raises(
            EventLogError,
            match="line 1: Expected an 'open' header",
        ) as info:
            read_event_log(path)
        assert info.value.line == 1

    def test_empty_file(self, tmp_path: Path) -> None:
        path = tmp_path / "e.jsonl"
        path.write_text("")
        with pytest.raises(EventLogError, match="no header"):
            read_event_log(path)

    def test_invalid_json(self, tmp_path: Path) -> None:
        path = tmp_path / "e.jsonl"
        path.write_text(json.dumps(HEADER) + "\n{not json\n")
        with pytest.raises(EventLogError, match="line 2: Invalid JSON") as info:
            read_event_log(path)
        assert info.value.line == 2

    def test_join_without_choices(self, tmp_path: Path) -> None:
        path = _write_lines(
            tmp_path / "e.jsonl",
            HEADER,
            {"op": "join", "user": 0, "loads_digest": "ab"},
        )
        with pytest.raises(EventLogError, match="line 2: Malformed event"):
            read_event_log(path)

    def test_unknown_op(self, tmp_path: Path) -> None:
        path = _write_lines(
            tmp_path / "e.jsonl",
            HEADER,
            {"op": "rename", "user": 0, "loads_digest": "ab"},
        )
        with pytest.raises(EventLogError, match="Malformed event"):
            read_event_log(path)

    def test_malformed_header(self, tmp_path: Path) -> None:
        path = _write_lines(tmp_path / "e.jsonl", {"op": "open"})
        with pytest.raises(EventLogError, match="Malformed header"):
            read_event_log(path)
