"""Tests for replaying and auditing event logs."""

from __future__ import annotations

import dataclasses
from typing import TYPE_CHECKING

import numpy as np
import pytest

from rs_coded_caching import (
    ChurnEvent,
    DynamicResult,
    EventLog,
    VirtualPool,
    make_adversary,
    read_event_log,
    replay_events,
    run_churn,
    sample_join,
    write_event_log,
)
from rs_coded_caching._config import BallsBinsConfig
from rs_coded_caching._trials import ballsbins_run, churn_script, derive_seed
from rs_coded_caching.enums import AdversaryKind, ChurnOp
from rs_coded_caching.exceptions import DimensionMismatchError, ParameterOutOfRangeError

if TYPE_CHECKING:
    from pathlib import Path

    from rs_coded_caching import RsGraph


def _log(pool: VirtualPool) -> EventLog:
    assert pool.events is not None
    return EventLog(
        num_virtual_users=pool.num_virtual_users,
        population_cap=pool.population_cap,
        events=tuple(enumerate(pool.events, start=2)),
    )


def _churned_pool(num_virtual_users: int = 10) -> VirtualPool:
    pool = VirtualPool.detached(num_virtual_users=num_virtual_users, population_cap=40)
    script = make_adversary(AdversaryKind.RANDOM_FIXED, 40, 100, seed=3)
    return run_churn(pool, script, np.random.default_rng(3))


class TestReplay:
    """Tests for replay_events()."""

    def test_thousand_joins(self) -> None:
        """Test that 1000 joins at K_cap = 1024 cost 30000 bits."""
        pool = VirtualPool.detached(num_virtual_users=100, population_cap=1024)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            sample_join(pool, rng)

        result = replay_events(_log(pool))
        assert result.ok
        assert result.joins == 1000
        assert result.leaves == 0
        assert result.bits_overhead == 30000
        np.testing.assert_array_equal(result.pool.loads, pool.loads)

    def test_churn(self) -> None:
        pool = _churned_pool()
        result = replay_events(_log(pool), audit_interval=7)
        assert result.ok, result.failure
        assert (result.joins, result.leaves) == (140, 100)
        assert result.pool.snapshot() == pool.snapshot()

    def test_empty_log(self) -> None:
        result = replay_events(EventLog(num_virtual_users=4, population_cap=16))
        assert result.ok
        assert result.bits_overhead == 0
        assert result.pool.population == 0

    def test_through_a_file(self, tmp_path: Path) -> None:
        pool = _churned_pool()
        assert pool.events is not None
        path = tmp_path / "events.jsonl"
        write_event_log(path, pool.events, num_virtual_users=10, population_cap=40)
        result = replay_events(read_event_log(path))
        assert result.ok
        assert result.bits_overhead == 140 * 18

    def test_with_graph(self, binomial_4_1: RsGraph) -> None:
        pool = VirtualPool.create(binomial_4_1, population_cap=8)
        rng = np.random.default_rng(1)
        for _ in range(8):
            sample_join(pool, rng)
        result = replay_events(_log(pool), graph=binomial_4_1)
        assert result.ok
        assert result.pool.graph is binomial_4_1
        replayed = result.pool
        assert replayed.cache_of(3) is replayed.virtual_caches[pool.slot_of(3)]

    def test_graph_size_mismatch(self, binomial_6_2: RsGraph) -> None:
        with pytest.raises(DimensionMismatchError, match="virtual users"):
            replay_events(
                EventLog(num_virtual_users=4, population_cap=8),
                graph=binomial_6_2,
            )

    def test_audit_interval(self) -> None:
        with pytest.raises(ParameterOutOfRangeError):
            replay_events(
                EventLog(num_virtual_users=1, population_cap=2),
                audit_interval=0,
            )


class TestReplayFailures:
    """Tests for logs that fail the audit."""

    def test_unknown_user_leaves(self) -> None:
        log = EventLog(
            num_virtual_users=2,
            population_cap=4,
            events=((2, ChurnEvent(op=ChurnOp.LEAVE, user=9, loads_digest="00")),),
        )
        result = replay_events(log)
        assert not result.ok
        assert result.failure is not None
        assert result.failure.line == 2
        assert "not present" in str(result.failure)

    def test_tampered_choice(self) -> None:
        pool = _churned_pool()
        log = _log(pool)
        index = next(
            i
            for i, (_, e) in enumerate(log.events)
            if e.op == ChurnOp.JOIN
            and e.choices is not None
            and len(set(e.choices)) > 1
        )
        line, event = log.events[index]
        assert event.choices is not None
        other = next(c for c in event.choices if c != event.chosen)
        tampered = dataclasses.replace(event, chosen=other)
        events = (*log.events[:index], (line, tampered), *log.events[index + 1 :])

        result = replay_events(dataclasses.replace(log, events=events))
        assert result.failure is not None
        assert result.failure.line == line
        assert "log says" in str(result.failure)
        assert result.joins + result.leaves == index

    def test_tampered_digest(self) -> None:
        pool = _churned_pool()
        log = _log(pool)
        line, event = log.events[5]
        tampered = dataclasses.replace(event, loads_digest="0" * 16)
        events = (*log.events[:5], (line, tampered), *log.events[6:])

        result = replay_events(dataclasses.replace(log, events=events))
        assert result.failure is not None
        assert result.failure.line == line
        assert "digest" in str(result.failure)

    def test_duplicate_join(self) -> None:
        pool = VirtualPool.detached(num_virtual_users=2, population_cap=4)
        pool.admit([0], user=0)
        assert pool.events is not None
        (event,) = pool.events
        log = EventLog(
            num_virtual_users=2,
            population_cap=4,
            events=((2, event), (3, event)),
        )
        result = replay_events(log)
        assert result.failure is not None
        assert result.failure.line == 3
        assert result.joins == 1


@pytest.mark.slow
class TestReplayAtScale:
    """Replay audits of the event logs of full-size churn runs."""

    @pytest.mark.parametrize(
        "adversary",
        [AdversaryKind.FIFO, AdversaryKind.LIFO, AdversaryKind.RANDOM_FIXED],
    )
    def test_churn_logs(self, adversary: AdversaryKind) -> None:
        config = BallsBinsConfig(
            mode="churn",
            num_balls=10**4,
            num_bins=100,
            churn_steps=10**4,
            adversary=adversary,
            trials=50,
        )
        for trial in range(config.trials):
            pool = VirtualPool.detached(
                num_virtual_users=config.num_bins,
                population_cap=config.num_balls,
            )
            rng = np.random.default_rng(derive_seed(config.seed, trial))
            run_churn(pool, churn_script(config, trial), rng)

            result = replay_events(_log(pool), audit_interval=1000)
            assert result.ok, result.failure
            assert (result.joins, result.leaves) == (2 * 10**4, 10**4)
            assert result.pool.population == config.num_balls
            if trial == 0:
                dynamic = ballsbins_run(config, trial)
                assert isinstance(dynamic, DynamicResult)
                np.testing.assert_array_equal(result.pool.loads, dynamic.state.loads)
