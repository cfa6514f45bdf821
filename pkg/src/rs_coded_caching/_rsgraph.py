"""Ruzsa-Szemerédi bipartite graphs and the centralized schemes they define."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING
import sys

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

import numpy as np

from rs_coded_caching.enums import ViolationKind
from rs_coded_caching.exceptions import InvalidGraphError, ParameterOutOfRangeError
from rs_coded_caching.utils._subsets import (
    MAX_GROUND_SET,
    colex_subsets,
    subset_masks,
)

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Sequence

    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

_INDUCED_CHUNK = 1 << 22
"""Upper bound on cross pairs materialized at once by the induced check."""

Labels = tuple[tuple[int, ...], ...]


@dataclass(frozen=True, kw_only=True, eq=False)
class RsGraph:
    """A bipartite graph on packets [F] and users [K] with an ordered list of matchings.

    The edge set of the graph is the union of its matchings. Edges are stored
    flattened, grouped by matching: the edges of matching `i` are
    `packets[ptr[i]:ptr[i + 1]]` paired with `users[ptr[i]:ptr[i + 1]]`.

    Construction does not check the Ruzsa-Szemerédi properties; use
    [`validate_rs`][rs_coded_caching.validate_rs] for that.
    """

    num_packets: int
    """The number of packet vertices F (the subpacketization)."""

    num_users: int
    """The number of user vertices K."""

    packets: NDArray[np.int64]
    """Packet endpoint of every edge, grouped by matching."""

    users: NDArray[np.int64]
    """User endpoint of every edge, grouped by matching."""

    matching_ptr: NDArray[np.int64]
    """Offsets of each matching into `packets`/`users`, of length t + 1."""

    packet_labels: Labels | None = None
    """Optional subset label of each packet vertex (1-based ground set)."""

    user_labels: Labels | None = None
    """Optional subset label of each user vertex (1-based ground set)."""

    _edge_matching: NDArray[np.int64] | None = None
    """Cached matching index of every edge."""

    def __post_init__(self) -> None:
        if self.num_packets < 0 or self.num_users < 0:
            raise InvalidGraphError(
                f"Vertex counts must be non-negative, "
                f"got F={self.num_packets}, K={self.num_users}",
            )
        if self.packets.shape != self.users.shape or self.packets.ndim != 1:
            raise InvalidGraphError("Edge endpoint arrays must be 1D and equal length")
        ptr = self.matching_ptr
        if (
            ptr.ndim != 1
            or len(ptr) == 0
            or ptr[0] != 0
            or ptr[-1] != len(self.packets)
        ):
            raise InvalidGraphError("Matching offsets do not cover the edge arrays")
        if np.any(np.diff(ptr) < 0):
            raise InvalidGraphError("Matching offsets must be non-decreasing")
        if (
            self.packet_labels is not None
            and len(self.packet_labels) != self.num_packets
        ):
            raise InvalidGraphError("Expected one label per packet vertex")
        if self.user_labels is not None and len(self.user_labels) != self.num_users:
            raise InvalidGraphError("Expected one label per user vertex")

    @classmethod
    def from_matchings(
        cls,
        *,
        num_packets: int,
        num_users: int,
        matchings: Iterable[Iterable[tuple[int, int]]],
        packet_labels: Labels | None = None,
        user_labels: Labels | None = None,
    ) -> Self:
        """Create a graph from an ordered list of matchings of (packet, user) pairs."""
        packets: list[int] = []
        users: list[int] = []
        ptr = [0]
        for matching in matchings:
            for packet, user in matching:
                packets.append(int(packet))
                users.append(int(user))
            ptr.append(len(packets))

        return cls(
            num_packets=num_packets,
            num_users=num_users,
            packets=np.asarray(packets, dtype=np.int64),
            users=np.asarray(users, dtype=np.int64),
            matching_ptr=np.asarray(ptr, dtype=np.int64),
            packet_labels=packet_labels,
            user_labels=user_labels,
        )

    @property
    def num_matchings(self) -> int:
        """The number of matchings t."""
        return len(self.matching_ptr) - 1

    @property
    def num_edges(self) -> int:
        """The number of edges |E|, counted with multiplicity."""
        return len(self.packets)

    @property
    def matching_sizes(self) -> NDArray[np.int64]:
        """The number of edges in each matching."""
        return np.diff(self.matching_ptr)

    @property
    def edge_matching(self) -> NDArray[np.int64]:
        """The matching index of every edge."""
        if self._edge_matching is not None:
            return self._edge_matching

        edge_matching = np.repeat(
            np.arange(self.num_matchings, dtype=np.int64),
            self.matching_sizes,
        )
        # We use object.__setattr__ because the dataclass is frozen
        object.__setattr__(self, "_edge_matching", edge_matching)
        return edge_matching

    @property
    def matchings(self) -> list[list[tuple[int, int]]]:
        """The matchings as lists of (packet, user) pairs, in order."""
        return list(self.iter_matchings())

    def matching(self, index: int) -> list[tuple[int, int]]:
        """Return the edges of one matching as (packet, user) pairs."""
        start, stop = self.matching_ptr[index], self.matching_ptr[index + 1]
        return list(
            zip(
                self.packets[start:stop].tolist(),
                self.users[start:stop].tolist(),
                strict=True,
            ),
        )

    def iter_matchings(self) -> Iterator[list[tuple[int, int]]]:
        """Iterate over the matchings in order."""
        for index in range(self.num_matchings):
            yield self.matching(index)

    def user_degrees(self) -> NDArray[np.int64]:
        """The degree of every user vertex."""
        return np.bincount(self.users, minlength=self.num_users)[: self.num_users]

    def neighborhood(self, user: int) -> NDArray[np.int64]:
        """The packets adjacent to a user, i.e. the packets it does not cache."""
        return np.unique(self.packets[self.users == user])


@dataclass(frozen=True, kw_only=True)
class SchemeParams:
    """Parameters of the centralized scheme defined by a Ruzsa-Szemerédi graph."""

    rate: Fraction
    """Worst case rate t/F, in file transmissions."""

    memory_ratio: Fraction
    """Smallest cache ratio M/N = 1 - c/F that supports the scheme."""

    min_right_degree: int
    """The minimum user degree c."""

    avg_matching_size: Fraction
    """The average induced matching size r = |E|/t."""

    subpacketization: int
    """The number of packets per file F."""

    num_users: int
    """The number of users K."""

    num_matchings: int
    """The number of matchings t, i.e. packet transmissions per delivery."""

    def __post_init__(self) -> None:
        if self.rate <= 0:
            raise InvalidGraphError(f"Rate must be positive, got {self.rate}")
        if not 0 <= self.memory_ratio < 1:
            raise InvalidGraphError(
                f"Memory ratio must lie in [0, 1), got {self.memory_ratio}",
            )
        if self.min_right_degree > self.subpacketization:
            raise InvalidGraphError(
                f"Minimum right degree {self.min_right_degree} exceeds "
                f"F={self.subpacketization}",
            )


@dataclass(frozen=True, kw_only=True)
class Violation:
    """One failed Ruzsa-Szemerédi property."""

    kind: ViolationKind
    """Which property failed."""

    matching_index: int | None
    """The offending matching, if the failure is local to one."""

    detail: str
    """Human readable description."""


@dataclass(frozen=True, kw_only=True)
class ValidationReport:
    """Result of checking a graph against the Ruzsa-Szemerédi definition."""

    valid: bool
    """True when the partition, matching and induced properties all hold."""

    violations: tuple[Violation, ...]
    """All detected violations, empty when valid."""

    num_packets: int
    """F."""

    num_users: int
    """K."""

    num_matchings: int
    """t."""

    avg_matching_size: Fraction | None = None
    """r = |E|/t, reported on pass."""

    min_right_degree: int | None = None
    """c, reported on pass."""

    def violations_of(self, kind: ViolationKind) -> list[Violation]:
        """Return the violations of one kind."""
        return [v for v in self.violations if v.kind == kind]


def construct_binomial(n: int, a: int) -> RsGraph:
    """Construct the (r,t)-Ruzsa-Szemerédi graph on subsets of [n].

    Packet vertices are the a-subsets of [n], user vertices are the 2-subsets, and
    an a-subset is joined to a 2-subset when they are disjoint. Each (a+2)-subset S
    indexes one induced matching holding the edges (A, B) with A ∪ B = S.

    All subsets are indexed in colexicographic order, and edges within a matching
    are ordered by packet index.

    Args:
        n: Size of the ground set.
        a: Size of the packet subsets.

    Returns:
        A graph with F = C(n, a), K = C(n, 2) and t = C(n, a + 2), every matching
            of size C(a + 2, 2).

    Raises:
        ParameterOutOfRangeError: If a < 1 or a + 2 > n.

    """
    if a < 1 or a + 2 > n:
        raise ParameterOutOfRangeError(
            f"Binomial construction requires 1 <= a and a + 2 <= n, got n={n}, a={a}",
        )
    if n > MAX_GROUND_SET:
        raise ParameterOutOfRangeError(
            f"Binomial construction supports n <= {MAX_GROUND_SET}, got n={n}",
        )

    packet_subsets = colex_subsets(n, a)
    user_subsets = colex_subsets(n, 2)
    matching_subsets = colex_subsets(n, a + 2)

    # Every 2-subset of S picks out one edge of the matching indexed by S
    pairs = np.asarray(list(itertools.combinations(range(a + 2), 2)), dtype=np.int64)
    bits = np.left_shift(np.int64(1), matching_subsets)
    user_masks = bits[:, pairs[:, 0]] | bits[:, pairs[:, 1]]
    packet_masks = subset_masks(matching_subsets)[:, None] ^ user_masks

    graph = _graph_from_masks(
        packet_masks=packet_masks,
        user_masks=user_masks,
        packet_subsets=packet_subsets,
        user_subsets=user_subsets,
    )
    logger.debug(
        "Constructed binomial graph n=%d a=%d: F=%d K=%d t=%d",
        n,
        a,
        graph.num_packets,
        graph.num_users,
        graph.num_matchings,
    )
    return graph


def construct_mn(num_users: int, cached_fraction_numerator: int) -> RsGraph:
    """Construct the Ruzsa-Szemerédi form of the canonical centralized scheme.

    Packet vertices are the s-subsets of the K users and packet A is joined to user
    k when k ∉ A. Each (s+1)-subset S indexes one matching with edges (S∖{k}, k).

    Args:
        num_users: The number of users K.
        cached_fraction_numerator: s, so that each user caches a fraction s/K.

    Returns:
        A graph with F = C(K, s) and t = C(K, s + 1), rate (K - s)/(s + 1).

    Raises:
        ParameterOutOfRangeError: Unless 1 <= s < K.

    """
    s = cached_fraction_numerator
    if not 1 <= s < num_users:
        raise ParameterOutOfRangeError(
            f"Construction requires 1 <= s < K, got K={num_users}, s={s}",
        )
    if num_users > MAX_GROUND_SET:
        raise ParameterOutOfRangeError(
            f"Construction supports K <= {MAX_GROUND_SET}, got K={num_users}",
        )

    packet_subsets = colex_subsets(num_users, s)
    user_subsets = colex_subsets(num_users, 1)
    matching_subsets = colex_subsets(num_users, s + 1)

    user_masks = np.left_shift(np.int64(1), matching_subsets)
    packet_masks = subset_masks(matching_subsets)[:, None] ^ user_masks

    return _graph_from_masks(
        packet_masks=packet_masks,
        user_masks=user_masks,
        packet_subsets=packet_subsets,
        user_subsets=user_subsets,
    )


def _graph_from_masks(
    *,
    packet_masks: NDArray[np.int64],
    user_masks: NDArray[np.int64],
    packet_subsets: NDArray[np.int64],
    user_subsets: NDArray[np.int64],
) -> RsGraph:
    """Turn per-matching (t, r) arrays of endpoint bitmasks into an RsGraph."""
    # Colex order is numeric bitmask order, so ranks come from a sorted search
    packets = np.searchsorted(subset_masks(packet_subsets), packet_masks)
    users = np.searchsorted(subset_masks(user_subsets), user_masks)

    order = np.argsort(packets, axis=1, kind="stable")
    packets = np.take_along_axis(packets, order, axis=1)
    users = np.take_along_axis(users, order, axis=1)

    num_matchings, size = packets.shape
    return RsGraph(
        num_packets=len(packet_subsets),
        num_users=len(user_subsets),
        packets=packets.reshape(-1).astype(np.int64),
        users=users.reshape(-1).astype(np.int64),
        matching_ptr=np.arange(num_matchings + 1, dtype=np.int64) * size,
        packet_labels=_labels(packet_subsets),
        user_labels=_labels(user_subsets),
    )


def _labels(subsets: NDArray[np.int64]) -> Labels:
    return tuple(tuple(int(x) + 1 for x in row) for row in subsets.tolist())


def validate_rs(graph: RsGraph) -> ValidationReport:
    """Check the partition, matching and induced properties of a graph.

    The edge set is the union of the matchings. Malformed graphs produce violation
    entries; this function never raises on them.
    """
    violations: list[Violation] = []

    if graph.num_packets < 1 or graph.num_users < 1:
        violations.append(
            Violation(
                kind=ViolationKind.EMPTY,
                matching_index=None,
                detail=f"Need F >= 1 and K >= 1, got F={graph.num_packets}, "
                f"K={graph.num_users}",
            ),
        )
    if graph.num_matchings == 0:
        violations.append(
            Violation(
                kind=ViolationKind.EMPTY,
                matching_index=None,
                detail="Graph has no matchings",
            ),
        )
    violations.extend(
        Violation(
            kind=ViolationKind.EMPTY,
            matching_index=int(index),
            detail="Matching has no edges",
        )
        for index in np.flatnonzero(graph.matching_sizes == 0)
    )

    out_of_range = (
        (graph.packets < 0)
        | (graph.packets >= graph.num_packets)
        | (graph.users < 0)
        | (graph.users >= graph.num_users)
    )
    if np.any(out_of_range):
        violations.extend(
            Violation(
                kind=ViolationKind.RANGE,
                matching_index=int(index),
                detail="Edge endpoint outside [F] x [K]",
            )
            for index in np.unique(graph.edge_matching[out_of_range])
        )
        # Further checks index by vertex, so stop here
        return _report(graph, violations)

    violations.extend(_partition_violations(graph))
    violations.extend(_matching_violations(graph))
    violations.extend(_induced_violations(graph))

    return _report(graph, violations)


def _report(graph: RsGraph, violations: Sequence[Violation]) -> ValidationReport:
    if violations:
        return ValidationReport(
            valid=False,
            violations=tuple(violations),
            num_packets=graph.num_packets,
            num_users=graph.num_users,
            num_matchings=graph.num_matchings,
        )

    return ValidationReport(
        valid=True,
        violations=(),
        num_packets=graph.num_packets,
        num_users=graph.num_users,
        num_matchings=graph.num_matchings,
        avg_matching_size=Fraction(graph.num_edges, graph.num_matchings),
        min_right_degree=int(graph.user_degrees().min()),
    )


def _edge_keys(graph: RsGraph) -> NDArray[np.int64]:
    return graph.packets * graph.num_users + graph.users


def _partition_violations(graph: RsGraph) -> list[Violation]:
    keys, inverse, counts = np.unique(
        _edge_keys(graph),
        return_inverse=True,
        return_counts=True,
    )
    violations: list[Violation] = []
    for key_index in np.flatnonzero(counts > 1):
        key = int(keys[key_index])
        packet, user = divmod(key, graph.num_users)
        owners = np.unique(graph.edge_matching[inverse == key_index]).tolist()
        violations.append(
            Violation(
                kind=ViolationKind.PARTITION,
                matching_index=owners[0],
                detail=f"Edge ({packet}, {user}) appears {counts[key_index]} times, "
                f"in matchings {owners}",
            ),
        )
    return violations


def _matching_violations(graph: RsGraph) -> list[Violation]:
    violations: list[Violation] = []
    for vertices, count, name in (
        (graph.packets, graph.num_packets, "packet"),
        (graph.users, graph.num_users, "user"),
    ):
        keys, counts = np.unique(
            graph.edge_matching * count + vertices,
            return_counts=True,
        )
        for key in keys[counts > 1].tolist():
            matching_index, vertex = divmod(key, count)
            violations.append(
                Violation(
                    kind=ViolationKind.MATCHING,
                    matching_index=matching_index,
                    detail=f"Two edges share {name} vertex {vertex}",
                ),
            )
    return violations


def _induced_violations(graph: RsGraph) -> list[Violation]:
    edge_keys = np.unique(_edge_keys(graph))
    sizes = graph.matching_sizes
    bad: list[int] = []

    for size in np.unique(sizes[sizes >= 2]).tolist():  # noqa: PLR2004
        matching_indices = np.flatnonzero(sizes == size)
        off_diagonal = ~np.eye(size, dtype=np.bool_)
        chunk = max(1, _INDUCED_CHUNK // (size * size))

        for start in range(0, len(matching_indices), chunk):
            block = matching_indices[start : start + chunk]
            edge_index = graph.matching_ptr[block][:, None] + np.arange(size)
            packets = graph.packets[edge_index]
            users = graph.users[edge_index]

            # cross[m, i, j] is the pair (packet of edge i, user of edge j)
            cross = packets[:, :, None] * graph.num_users + users[:, None, :]
            hits = np.isin(cross, edge_keys) & off_diagonal
            bad.extend(block[hits.any(axis=(1, 2))].tolist())

    return [
        Violation(
            kind=ViolationKind.INDUCED,
            matching_index=index,
            detail="Matching vertices induce an edge outside the matching",
        )
        for index in sorted(bad)
    ]


def scheme_params(graph: RsGraph, *, validate: bool = True) -> SchemeParams:
    """Return the centralized scheme parameters of a Ruzsa-Szemerédi graph.

    Args:
        graph: The graph.

    Keyword Args:
        validate: Check the graph with `validate_rs` first. Pass False only for
            graphs produced by the constructions in this package.

    Raises:
        InvalidGraphError: If the graph is not a valid Ruzsa-Szemerédi graph, or
            some user has no edges (it would have to cache every file).

    """
    if validate:
        report = validate_rs(graph)
        if not report.valid:
            raise InvalidGraphError(
                f"Graph is not Ruzsa-Szemerédi: {report.violations[0].detail} "
                f"({len(report.violations)} violations)",
            )
    elif graph.num_matchings == 0:
        raise InvalidGraphError("Graph has no matchings")

    degrees = graph.user_degrees()
    min_degree = int(degrees.min()) if len(degrees) else 0
    if min_degree == 0:
        raise InvalidGraphError(
            "Some user has no edges, so the scheme would need M/N = 1",
        )

    return SchemeParams(
        rate=Fraction(graph.num_matchings, graph.num_packets),
        memory_ratio=1 - Fraction(min_degree, graph.num_packets),
        min_right_degree=min_degree,
        avg_matching_size=Fraction(graph.num_edges, graph.num_matchings),
        subpacketization=graph.num_packets,
        num_users=graph.num_users,
        num_matchings=graph.num_matchings,
    )
