"""Replay a pool event log and audit it."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

from rs_coded_caching._decentral import VirtualPool
from rs_coded_caching._events import loads_digest
from rs_coded_caching.enums import ChurnOp
from rs_coded_caching.exceptions import (
    DimensionMismatchError,
    EventLogError,
    ParameterOutOfRangeError,
    UnknownUserError,
)

if TYPE_CHECKING:
    from rs_coded_caching._events import ChurnEvent, EventLog
    from rs_coded_caching._rsgraph import RsGraph

logger = logging.getLogger(__name__)

DEFAULT_AUDIT_INTERVAL = 64
"""Events between two full snapshots of the pool."""


@dataclass(frozen=True, kw_only=True, eq=False)
class ReplayResult:
    """A replayed pool and the outcome of its audit."""

    pool: VirtualPool
    """The pool after the last successfully replayed event."""

    joins: int
    leaves: int

    bits_overhead: int
    """Join overhead of every replayed join."""

    failure: EventLogError | None = None
    """The first audit failure, with its line number."""

    @property
    def ok(self) -> bool:
        """True when every event replayed and passed the audit."""
        return self.failure is None


def _apply(pool: VirtualPool, event: ChurnEvent) -> str | None:
    """Apply one event, returning a description of any disagreement."""
    if event.op == ChurnOp.LEAVE:
        pool.remove(event.user)
        return None

    if event.choices is None:
        return "join without choices"
    record = pool.admit(event.choices, user=event.user)
    if record.chosen != event.chosen:
        return f"user {event.user} joined {record.chosen}, log says {event.chosen}"
    return None


def replay_events(
    log: EventLog,
    *,
    graph: RsGraph | None = None,
    audit_interval: int = DEFAULT_AUDIT_INTERVAL,
) -> ReplayResult:
    """Rebuild a pool from its event log, stopping at the first audit failure.

    After every event the load vector must match its logged digest and sum to the
    population. Every `audit_interval` events, a snapshot of the pool is compared
    with the previous one: only users named by events in between may differ, and
    every user must sit where the log put it.

    Keyword Args:
        graph: Replay into a pool with cache contents from this graph.
        audit_interval: Events between two snapshot comparisons.

    """
    if audit_interval < 1:
        raise ParameterOutOfRangeError(
            f"Need audit interval >= 1, got {audit_interval}",
        )
    if graph is not None:
        if graph.num_users != log.num_virtual_users:
            raise DimensionMismatchError(
                f"Log has {log.num_virtual_users} virtual users, "
                f"graph has {graph.num_users}",
            )
        pool = VirtualPool.create(
            graph,
            population_cap=log.population_cap,
            record_events=False,
        )
    else:
        pool = VirtualPool.detached(
            num_virtual_users=log.num_virtual_users,
            population_cap=log.population_cap,
            record_events=False,
        )

    expected: dict[int, int] = {}
    before = pool.snapshot()
    touched: set[int] = set()
    joins = leaves = 0
    failure: EventLogError | None = None

    for index, (line, event) in enumerate(log.events, start=1):
        try:
            problem = _apply(pool, event)
        except (UnknownUserError, ParameterOutOfRangeError) as err:
            # KeyError wraps its message in quotes
            problem = err.args[0] if err.args else repr(err)

        if problem is None and loads_digest(pool.loads) != event.loads_digest:
            problem = "load vector does not match its digest"
        if problem is None and (
            (pool.loads < 0).any() or int(pool.loads.sum()) != pool.population
        ):
            problem = "loads do not add up to the population"
        if problem is not None:
            failure = EventLogError(problem, line=line)
            break

        if event.op == ChurnOp.JOIN:
            joins += 1
            expected[event.user] = pool.slot_of(event.user)
        else:
            leaves += 1
            del expected[event.user]
        touched.add(event.user)

        if index % audit_interval == 0 or index == len(log.events):
            after = pool.snapshot()
            changed = VirtualPool.audit_non_interference(before, after, touched)
            if changed or after != expected:
                failure = EventLogError(
                    f"caches changed for users not named by the log: {changed[:8]}",
                    line=line,
                )
                break
            before = after
            touched.clear()

    if failure is not None:
        logger.warning("Replay audit failed at %s", failure)

    return ReplayResult(
        pool=pool,
        joins=joins,
        leaves=leaves,
        bits_overhead=joins * pool.bits_per_join,
        failure=failure,
    )
