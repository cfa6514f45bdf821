"""Decentralized placement and delivery on top of a centralized scheme.

K' virtual users share the caches of a centralized scheme. Every arriving real
user samples two virtual users and copies the cache of the less loaded one, so
the loads follow a two-choice balls-and-bins process. Delivery runs the
centralized scheme once per round, with absent virtual users demanding an
all-zero dummy file.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING

import numpy as np

from rs_coded_caching._ballsbins import (
    DEFAULT_CHOICES,
    bound_static,
    draw_choices,
    least_loaded,
)
from rs_coded_caching._codec import decode, deliver, place
from rs_coded_caching._events import ChurnEvent, loads_digest
from rs_coded_caching._library import DUMMY_FILE, DemandVector
from rs_coded_caching._rsgraph import scheme_params
from rs_coded_caching.enums import ChurnOp
from rs_coded_caching.exceptions import (
    CodedCachingError,
    DimensionMismatchError,
    InvalidGraphError,
    ParameterOutOfRangeError,
    UnknownUserError,
)

if TYPE_CHECKING:
    from collections.abc import Collection, Mapping, Sequence

    from numpy.typing import NDArray

    from rs_coded_caching._ballsbins import ChurnScript
    from rs_coded_caching._codec import CacheState, TransmissionBatch
    from rs_coded_caching._library import Library
    from rs_coded_caching._rsgraph import RsGraph

logger = logging.getLogger(__name__)


def join_overhead_bits(population_cap: int) -> int:
    """Return 3 ceil(log2 K_cap), the bits exchanged by one join.

    A joining user sends its two choices and learns the chosen index, each an
    index below K_cap.

    Raises:
        ParameterOutOfRangeError: If K_cap < 2.

    """
    if population_cap < 2:  # noqa: PLR2004
        raise ParameterOutOfRangeError(f"Need K_cap >= 2, got {population_cap}")
    # ceil(log2(x)) for integers x >= 1
    return 3 * (population_cap - 1).bit_length()


@dataclass(frozen=True, kw_only=True)
class JoinRecord:
    """Outcome of one join."""

    user: int
    """The real user that joined."""

    choices: tuple[int, ...]
    """The sampled virtual users, first draw first."""

    chosen: int
    """The virtual user whose cache was copied."""

    bits_exchanged: int
    """Communication overhead of the join."""


@dataclass(frozen=True, kw_only=True)
class Assignment:
    """Where a present real user sits."""

    slot: int
    """The virtual user index."""

    join_order: int
    """Global 0-based join sequence number."""


@dataclass(kw_only=True, eq=False)
class VirtualPool:
    """K' virtual cache contents, their loads, and the real users holding them.

    A pool is a single-writer state machine: every join and leave goes through
    [`admit`][rs_coded_caching.VirtualPool.admit] and
    [`remove`][rs_coded_caching.VirtualPool.remove], which touch only the load
    of one virtual user and the entry of one real user.

    Pools created with [`detached`][rs_coded_caching.VirtualPool.detached] carry
    no graph and track loads only.
    """

    num_virtual_users: int
    """K', the number of bins."""

    population_cap: int
    """K_cap, the configured bound on the population."""

    graph: RsGraph | None = None
    """The centralized scheme's graph over the K' virtual users."""

    virtual_caches: tuple[CacheState, ...] = ()
    """Cache content C_k of every virtual user."""

    choices: int = DEFAULT_CHOICES
    """Virtual users sampled per join."""

    loads: NDArray[np.int64] = field(init=False)
    """X_k, the number of present real users holding C_k."""

    assignments: dict[int, Assignment] = field(default_factory=dict)
    """Present real users and their virtual user."""

    members: list[list[int]] = field(init=False)
    """Present real users of every virtual user, in join order."""

    events: list[ChurnEvent] | None = field(default_factory=list)
    """Log of joins and leaves, or None when not recorded."""

    _joins: int = field(default=0, init=False, repr=False)
    _next_user: int = field(default=0, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.num_virtual_users < 1:
            raise ParameterOutOfRangeError(
                f"Need at least one virtual user, got {self.num_virtual_users}",
            )
        if self.graph is not None:
            if self.graph.num_users != self.num_virtual_users:
                raise DimensionMismatchError(
                    f"Graph has {self.graph.num_users} users, "
                    f"pool has {self.num_virtual_users} virtual users",
                )
            if not self.virtual_caches:
                self.virtual_caches = tuple(place(self.graph))
        self.loads = np.zeros(self.num_virtual_users, dtype=np.int64)
        self.members = [[] for _ in range(self.num_virtual_users)]

    @classmethod
    def create(
        cls,
        graph: RsGraph,
        *,
        population_cap: int,
        choices: int = DEFAULT_CHOICES,
        record_events: bool = True,
    ) -> VirtualPool:
        """Create an empty pool whose virtual users are the users of `graph`."""
        return cls(
            num_virtual_users=graph.num_users,
            population_cap=population_cap,
            graph=graph,
            choices=choices,
            events=[] if record_events else None,
        )

    @classmethod
    def detached(
        cls,
        *,
        num_virtual_users: int,
        population_cap: int,
        choices: int = DEFAULT_CHOICES,
        record_events: bool = True,
    ) -> VirtualPool:
        """Create an empty pool without cache contents."""
        return cls(
            num_virtual_users=num_virtual_users,
            population_cap=population_cap,
            choices=choices,
            events=[] if record_events else None,
        )

    @property
    def population(self) -> int:
        """The number of real users present."""
        return len(self.assignments)

    @property
    def max_load(self) -> int:
        """max_k X_k."""
        return int(self.loads.max())

    @property
    def bits_per_join(self) -> int:
        """Join overhead in bits, zero for a population cap below two."""
        if self.population_cap < 2:  # noqa: PLR2004
            return 0
        return join_overhead_bits(self.population_cap)

    @property
    def bits_overhead(self) -> int:
        """Total join overhead so far."""
        return self._joins * self.bits_per_join

    def require_graph(self) -> RsGraph:
        """Return the graph.

        Raises:
            InvalidGraphError: If the pool is detached.

        """
        if self.graph is None:
            raise InvalidGraphError("Pool was created without a graph")
        return self.graph

    def cache_of(self, user: int) -> CacheState:
        """Return the cache of a present real user: its virtual user's content.

        Raises:
            UnknownUserError: If the user is not present.

        """
        self.require_graph()
        return self.virtual_caches[self.slot_of(user)]

    def slot_of(self, user: int) -> int:
        """Return the virtual user of a present real user.

        Raises:
            UnknownUserError: If the user is not present.

        """
        try:
            return self.assignments[user].slot
        except KeyError:
            raise UnknownUserError(f"User {user} is not present") from None

    def snapshot(self) -> dict[int, int]:
        """Map every present real user to its virtual user."""
        return {user: a.slot for user, a in self.assignments.items()}

    def admit(
        self,
        candidates: Sequence[int],
        *,
        user: int | None = None,
    ) -> JoinRecord:
        """Join a real user given its sampled virtual users.

        The least loaded candidate wins, the earliest one on ties.

        Args:
            candidates: The sampled virtual users, first draw first.

        Keyword Args:
            user: The real user id. Defaults to one above the largest id seen.

        Raises:
            ParameterOutOfRangeError: If the user is already present or a
                candidate is not a virtual user.

        """
        candidates = tuple(int(c) for c in candidates)
        if not candidates or not all(
            0 <= c < self.num_virtual_users for c in candidates
        ):
            raise ParameterOutOfRangeError(
                f"Candidates {candidates} outside [0, {self.num_virtual_users})",
            )
        if user is None:
            user = self._next_user
        if user in self.assignments:
            raise ParameterOutOfRangeError(f"User {user} is already present")

        chosen = least_loaded(self.loads, candidates)
        self.loads[chosen] += 1
        self.assignments[user] = Assignment(slot=chosen, join_order=self._joins)
        self.members[chosen].append(user)
        self._joins += 1
        self._next_user = max(self._next_user, user + 1)

        if self.events is not None:
            self.events.append(
                ChurnEvent(
                    op=ChurnOp.JOIN,
                    user=user,
                    choices=candidates,
                    chosen=chosen,
                    loads_digest=loads_digest(self.loads),
                ),
            )
        return JoinRecord(
            user=user,
            choices=candidates,
            chosen=chosen,
            bits_exchanged=self.bits_per_join,
        )

    def remove(self, user: int) -> int:
        """Remove a real user and return the virtual user it held.

        Raises:
            UnknownUserError: If the user is not present.

        """
        slot = self.slot_of(user)
        del self.assignments[user]
        self.members[slot].remove(user)
        self.loads[slot] -= 1

        if self.events is not None:
            self.events.append(
                ChurnEvent(
                    op=ChurnOp.LEAVE,
                    user=user,
                    loads_digest=loads_digest(self.loads),
                ),
            )
        return slot

    @staticmethod
    def audit_non_interference(
        before: Mapping[int, int],
        after: Mapping[int, int],
        touched: Collection[int],
    ) -> list[int]:
        """Return users outside `touched` whose cache differs between snapshots.

        A user that appears in only one of the snapshots counts as changed.
        """
        changed = [
            user
            for user in before.keys() | after.keys()
            if user not in touched and before.get(user) != after.get(user)
        ]
        return sorted(changed)


def sample_join(
    pool: VirtualPool,
    rng: np.random.Generator,
    *,
    user: int | None = None,
) -> JoinRecord:
    """Join one real user, sampling its candidates uniformly with replacement."""
    row = draw_choices(rng, pool.num_virtual_users, 1, choices=pool.choices)[0]
    return pool.admit(row.tolist(), user=user)


def leave(pool: VirtualPool, user: int) -> int:
    """Remove a real user from the pool and return its virtual user.

    Caches and loads of every other user are untouched.

    Raises:
        UnknownUserError: If the user is not present.

    """
    return pool.remove(user)


def place_all(
    pool: VirtualPool,
    num_users: int,
    rng: np.random.Generator,
) -> VirtualPool:
    """Join real users 0, ..., K-1 in order.

    All choices are drawn in one block with the same protocol as
    [`run_static`][rs_coded_caching.run_static], so equal seeds give equal loads.

    Raises:
        ParameterOutOfRangeError: If the pool is not empty.

    """
    if pool.population:
        raise ParameterOutOfRangeError(
            f"Placement needs an empty pool, found {pool.population} users",
        )
    draws = draw_choices(rng, pool.num_virtual_users, num_users, choices=pool.choices)
    for row in draws.tolist():
        pool.admit(row)
    logger.debug(
        "Placed %d users on %d virtual users, max load %d",
        num_users,
        pool.num_virtual_users,
        pool.max_load if num_users else 0,
    )
    return pool


def run_churn(
    pool: VirtualPool,
    script: ChurnScript,
    rng: np.random.Generator,
) -> VirtualPool:
    """Drive an empty pool with an insert/delete script.

    The ball inserted at time i is real user i - 1. Choices are drawn like
    [`run_dynamic`][rs_coded_caching.run_dynamic] draws them, so equal seeds give
    equal loads.
    """
    if pool.population:
        raise ParameterOutOfRangeError(
            f"Churn needs an empty pool, found {pool.population} users",
        )
    draws = draw_choices(
        rng,
        pool.num_virtual_users,
        script.num_insertions,
        choices=pool.choices,
    )
    for step, row in enumerate(draws.tolist()):
        if step >= script.population_cap:
            pool.remove(script.deletions[step - script.population_cap] - 1)
        pool.admit(row, user=step)
    return pool


Round = dict[int, tuple[int, int]]
"""Occupied virtual user -> (real user, demanded file)."""


@dataclass(frozen=True, kw_only=True)
class DeliveryPlan:
    """Rounds of distinct virtual users that together serve every real user."""

    rounds: tuple[Round, ...]
    """Round i holds the i-th joined real user of every virtual user with X_k > i."""

    num_matchings: int
    """t, the transmissions per round of the centralized scheme."""

    naive_transmission_count: int
    """t times the number of rounds."""

    pruned_transmission_count: int
    """Transmissions left after dropping matchings with only dummy demands."""

    @property
    def num_rounds(self) -> int:
        """The number of rounds, max_k X_k."""
        return len(self.rounds)

    def served_users(self) -> list[int]:
        """Every real user served, in round order."""
        return [user for round_ in self.rounds for user, _ in round_.values()]


def touched_matchings(graph: RsGraph, slots: Sequence[int]) -> NDArray[np.int64]:
    """Sorted indices of the matchings with an edge at one of `slots`."""
    touched = np.isin(graph.users, np.asarray(slots, dtype=np.int64))
    return np.unique(graph.edge_matching[touched])


def _demand_of(demands: DemandVector | Mapping[int, int], user: int) -> int:
    try:
        return demands[user]
    except (IndexError, KeyError):
        raise DimensionMismatchError(f"No demand for real user {user}") from None


def build_rounds(
    pool: VirtualPool,
    demands: DemandVector | Mapping[int, int],
) -> DeliveryPlan:
    """Schedule delivery in max_k X_k rounds, first-joined users first.

    Args:
        pool: A pool with a graph.
        demands: The demanded file of every present real user, indexed by user id.

    """
    graph = pool.require_graph()
    depth = pool.max_load if pool.population else 0

    rounds: list[Round] = []
    pruned = 0
    for i in range(depth):
        round_ = {
            slot: (members[i], _demand_of(demands, members[i]))
            for slot, members in enumerate(pool.members)
            if len(members) > i
        }
        rounds.append(round_)
        pruned += touched_matchings(graph, list(round_)).size

    return DeliveryPlan(
        rounds=tuple(rounds),
        num_matchings=graph.num_matchings,
        naive_transmission_count=graph.num_matchings * depth,
        pruned_transmission_count=pruned,
    )


def round_demands(plan_round: Round, num_virtual_users: int) -> DemandVector:
    """Demands of the virtual users in one round, dummy for unoccupied ones."""
    demands = [DUMMY_FILE] * num_virtual_users
    for slot, (_, demand) in plan_round.items():
        demands[slot] = demand
    return DemandVector(tuple(demands))


@dataclass(frozen=True, kw_only=True)
class DecentralizedDelivery:
    """Transmission counts and decode results of a decentralized delivery."""

    naive_transmission_count: int
    """t per round."""

    pruned_transmission_count: int
    """Transmissions whose matching touches an occupied virtual user."""

    sent_count: int
    """Transmissions actually sent: pruned or naive depending on the mode."""

    decoded_users: int
    """The number of real users whose decoding was checked."""

    failures: dict[int, str] = field(default_factory=dict)
    """Real users that failed to decode, with the reason."""

    transmissions: tuple[TransmissionBatch, ...] = ()
    """The per-round transmissions, when kept."""

    @property
    def decode_ok(self) -> bool:
        """True when every checked real user recovered its file exactly."""
        return not self.failures


def _decode_sample(slots: list[int], limit: int | None) -> list[int]:
    if limit is None or len(slots) <= limit:
        return slots
    step = math.ceil(len(slots) / limit)
    return slots[::step]


def deliver_decentralized(  # noqa: PLR0913
    pool: VirtualPool,
    library: Library,
    plan: DeliveryPlan,
    *,
    prune: bool = False,
    decode_limit: int | None = None,
    keep_transmissions: bool = False,
) -> DecentralizedDelivery:
    """Deliver every round and check that every real user decodes its file.

    Args:
        pool: The pool the plan was built from.
        library: The files, with F packets each.
        plan: The round schedule.

    Keyword Args:
        prune: Send only matchings that touch an occupied virtual user.
        decode_limit: Check at most this many evenly spread real users per round.
        keep_transmissions: Keep the per-round transmissions in the result.

    Raises:
        DimensionMismatchError: If the library does not match the graph.

    """
    graph = pool.require_graph()
    naive = 0
    pruned = 0
    sent = 0
    decoded = 0
    failures: dict[int, str] = {}
    kept: list[TransmissionBatch] = []

    for plan_round in plan.rounds:
        demands = round_demands(plan_round, pool.num_virtual_users)
        batch = deliver(graph, library, demands, prune_dummy=prune)
        naive += graph.num_matchings
        pruned += touched_matchings(graph, list(plan_round)).size
        sent += len(batch)
        if keep_transmissions:
            kept.append(batch)

        for slot in _decode_sample(sorted(plan_round), decode_limit):
            user, demand = plan_round[slot]
            decoded += 1
            try:
                recovered = decode(
                    slot,
                    pool.virtual_caches[slot],
                    batch,
                    demands,
                    library,
                )
            except CodedCachingError as err:
                failures[user] = str(err)
                continue
            wrong = int(np.count_nonzero(recovered != library.file(demand)))
            if wrong:
                failures[user] = f"{wrong} bytes differ"

    if failures:
        logger.warning("%d real users failed to decode", len(failures))

    return DecentralizedDelivery(
        naive_transmission_count=naive,
        pruned_transmission_count=pruned,
        sent_count=sent,
        decoded_users=decoded,
        failures=failures,
        transmissions=tuple(kept),
    )


@dataclass(frozen=True, kw_only=True)
class RateReport:
    """Rates of a decentralized delivery, normalized by F."""

    centralized_rate: Fraction
    """R_c = t/F of the underlying scheme."""

    memory_ratio: Fraction
    """M/N of the underlying scheme."""

    max_load: int
    """max_k X_k."""

    naive_rate: Fraction
    """R_c times the max load: every round sends all t transmissions."""

    pruned_rate: Fraction
    """Rate after dropping matchings with only dummy demands."""

    bound: float | None
    """The high-probability bound on `naive_rate`, None for K' < 3."""

    uncoded_rate: Fraction
    """K(1 - M/N), the rate without coding."""

    @property
    def achieved_gain(self) -> float | None:
        """The uncoded rate divided by the naive rate."""
        if self.naive_rate == 0:
            return None
        return float(self.uncoded_rate / self.naive_rate)


def measure_rate(
    pool: VirtualPool,
    plan: DeliveryPlan,
    graph: RsGraph | None = None,
    *,
    gain: float | None = None,
) -> RateReport:
    """Compute rates of a plan.

    The bound is K(1 - M/N)/g + R_c(lnln K'/ln 2 + 9) when `gain` is given, and
    R_c(K/K' + lnln K'/ln 2 + 9) otherwise.
    """
    graph = graph if graph is not None else pool.require_graph()
    params = scheme_params(graph, validate=False)
    rate = params.rate
    num_users = pool.population
    k_prime = graph.num_users

    bound: float | None = None
    if k_prime >= 3 and gain is None:  # noqa: PLR2004
        bound = float(rate) * bound_static(num_users, k_prime)
    elif k_prime >= 3 and gain is not None:  # noqa: PLR2004
        # bound_static(0, K') is the lnln K'/ln 2 + 9 term alone
        bound = num_users * float(1 - params.memory_ratio) / gain + float(
            rate,
        ) * bound_static(0, k_prime)

    return RateReport(
        centralized_rate=rate,
        memory_ratio=params.memory_ratio,
        max_load=plan.num_rounds,
        naive_rate=Fraction(plan.naive_transmission_count, graph.num_packets),
        pruned_rate=Fraction(plan.pruned_transmission_count, graph.num_packets),
        bound=bound,
        uncoded_rate=num_users * (1 - params.memory_ratio),
    )
