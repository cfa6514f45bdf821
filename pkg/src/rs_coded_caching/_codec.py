"""Packet-level placement, XOR delivery and decoding for a Ruzsa-Szemerédi scheme."""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import TYPE_CHECKING, overload
import sys

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

import numpy as np

from rs_coded_caching._library import DUMMY_FILE
from rs_coded_caching._rsgraph import RsGraph
from rs_coded_caching.exceptions import (
    CodedCachingError,
    DimensionMismatchError,
    MissingTransmissionError,
    UndecodableError,
)

if TYPE_CHECKING:
    from collections.abc import Iterator
    from os import PathLike

    from numpy.typing import NDArray

    from rs_coded_caching._library import DemandVector, Library

logger = logging.getLogger(__name__)


@dataclass(frozen=True, kw_only=True, eq=False)
class CacheState:
    """The packets a user stores, the same packet indices for every file."""

    owner: int
    """The user (or virtual user) holding this cache."""

    mask: NDArray[np.bool_]
    """Boolean array of length F, True where the packet is cached."""

    @property
    def cached_packet_indices(self) -> frozenset[int]:
        """The cached packet indices."""
        return frozenset(np.flatnonzero(self.mask).tolist())

    @property
    def size(self) -> int:
        """The number of cached packets per file."""
        return int(np.count_nonzero(self.mask))

    def read(
        self,
        library: Library,
        file: int,
        packets: NDArray[np.int64],
    ) -> NDArray[np.uint8]:
        """Read packets of one file from the cache.

        The dummy file is known to every user and can always be read.

        Raises:
            UndecodableError: If a requested packet is not cached.

        """
        if file != DUMMY_FILE and not self.mask[packets].all():
            absent = packets[~self.mask[packets]]
            raise UndecodableError(
                f"User {self.owner} does not cache packets {absent.tolist()[:8]}",
            )
        return library.padded()[file, packets]


@dataclass(frozen=True, kw_only=True, eq=False)
class Transmission:
    """One XOR-coded broadcast message."""

    matching_index: int
    """The matching whose edges were XORed."""

    payload: bytes
    """The XOR of the demanded packets on the matching's edges."""

    constituents: tuple[tuple[int, int], ...] = ()
    """The (user, packet) pairs that were XORed, for auditing."""


class TransmissionBatch(Sequence[Transmission]):
    """The transmissions sent for one demand vector, backed by a payload array.

    Behaves as a sequence of [`Transmission`][rs_coded_caching.Transmission]
    objects, which are built on access.
    """

    def __init__(
        self,
        *,
        graph: RsGraph,
        demands: NDArray[np.int64],
        payloads: NDArray[np.uint8],
        sent: NDArray[np.int64],
    ) -> None:
        """Create a batch.

        Args:
            graph: The graph the transmissions were computed from.
            demands: Demand of every user of the graph.
            payloads: Array of shape (t, B); row i is the payload of matching i.
            sent: The matching indices actually sent, in order.

        """
        self.graph = graph
        self.demands = demands
        self.payloads = payloads
        self.sent = sent

    def __len__(self) -> int:
        return len(self.sent)

    @overload
    def __getitem__(self, index: int) -> Transmission: ...
    @overload
    def __getitem__(self, index: slice) -> list[Transmission]: ...
    def __getitem__(self, index: int | slice) -> Transmission | list[Transmission]:
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]

        matching_index = int(self.sent[index])
        return Transmission(
            matching_index=matching_index,
            payload=self.payloads[matching_index].tobytes(),
            constituents=tuple(
                (user, packet) for packet, user in self.graph.matching(matching_index)
            ),
        )

    def __iter__(self) -> Iterator[Transmission]:
        for index in range(len(self)):
            yield self[index]

    @property
    def rate(self) -> Fraction:
        """Normalized rate: transmissions sent divided by F."""
        return Fraction(len(self), self.graph.num_packets)

    def with_payload(self, matching_index: int, payload: bytes) -> Self:
        """Return a copy with one payload replaced."""
        payloads = self.payloads.copy()
        payloads[matching_index] = np.frombuffer(payload, dtype=np.uint8)
        return type(self)(
            graph=self.graph,
            demands=self.demands,
            payloads=payloads,
            sent=self.sent,
        )

    def payload_table(self) -> tuple[NDArray[np.bool_], NDArray[np.uint8]]:
        """Return (present, payloads) indexed by matching."""
        present = np.zeros(self.graph.num_matchings, dtype=np.bool_)
        present[self.sent] = True
        return present, self.payloads


def _check_dimensions(graph: RsGraph, library: Library) -> None:
    if library.num_packets != graph.num_packets:
        raise DimensionMismatchError(
            f"Library has F={library.num_packets} packets per file, "
            f"graph has F={graph.num_packets}",
        )


def place(graph: RsGraph, library: Library | None = None) -> list[CacheState]:
    """Place packets in every user's cache.

    User k caches packet f of every file exactly when (f, k) is not an edge.

    Raises:
        DimensionMismatchError: If the library does not have F packets per file.

    """
    if library is not None:
        _check_dimensions(graph, library)

    masks = np.ones((graph.num_users, graph.num_packets), dtype=np.bool_)
    masks[graph.users, graph.packets] = False
    masks.flags.writeable = False
    return [CacheState(owner=user, mask=masks[user]) for user in range(graph.num_users)]


def deliver(
    graph: RsGraph,
    library: Library,
    demands: DemandVector,
    *,
    prune_dummy: bool = False,
) -> TransmissionBatch:
    """Compute one XOR transmission per matching, in matching order.

    Args:
        graph: The scheme's graph.
        library: The files.
        demands: One file index per user of the graph. `DUMMY_FILE` entries demand
            the all-zero dummy file.

    Keyword Args:
        prune_dummy: Skip matchings whose every edge belongs to a dummy demand.

    Raises:
        DimensionMismatchError: If the graph, library and demands disagree.

    """
    _check_dimensions(graph, library)
    demands.check(num_users=graph.num_users, num_files=library.num_files)

    demand_arr = demands.as_array()
    files = demand_arr[graph.users]
    gathered = library.padded()[files, graph.packets]

    payloads = np.zeros(
        (graph.num_matchings, library.packet_bytes),
        dtype=np.uint8,
    )
    nonempty = graph.matching_sizes > 0
    if graph.num_edges:
        payloads[nonempty] = np.bitwise_xor.reduceat(
            gathered,
            graph.matching_ptr[:-1][nonempty],
            axis=0,
        )

    if prune_dummy:
        sent = np.unique(graph.edge_matching[files != DUMMY_FILE])
    else:
        sent = np.arange(graph.num_matchings, dtype=np.int64)

    return TransmissionBatch(
        graph=graph,
        demands=demand_arr,
        payloads=payloads,
        sent=sent,
    )


def decode(  # noqa: PLR0913
    user: int,
    cache: CacheState,
    transmissions: Sequence[Transmission],
    demands: DemandVector,
    library: Library,
    *,
    graph: RsGraph | None = None,
) -> NDArray[np.uint8]:
    """Reconstruct the file demanded by one user.

    Packets the user caches are read from its cache. Every other demanded packet f
    lies on exactly one matching edge (f, user); the user XORs that matching's
    payload with its cached copies of the other constituents, which it holds
    because the matching is induced.

    Args:
        user: The decoding user.
        cache: The user's cache.
        transmissions: The received transmissions.
        demands: The public demand vector.
        library: Source of cached packet bytes.

    Keyword Args:
        graph: Decode "blind", using only matching indices and payloads plus this
            public graph. Without it, the structure comes from the transmissions.

    Returns:
        The reconstructed file, an (F, B) uint8 array.

    Raises:
        MissingTransmissionError: If a needed matching was not transmitted.
        UndecodableError: If a needed packet is not cached.

    """
    if graph is None:
        if isinstance(transmissions, TransmissionBatch):
            graph = transmissions.graph
        else:
            graph = _graph_from_constituents(
                transmissions,
                num_packets=library.num_packets,
                num_users=len(demands),
            )
            if demands[user] != DUMMY_FILE:
                _check_received(user, cache, graph)

    present, payloads = _payload_table(
        transmissions,
        num_matchings=graph.num_matchings,
        packet_bytes=library.packet_bytes,
    )
    return _recover(
        user=user,
        cache=cache,
        graph=graph,
        present=present,
        payloads=payloads,
        demands=demands.as_array(),
        library=library,
    )


def _payload_table(
    transmissions: Sequence[Transmission],
    *,
    num_matchings: int,
    packet_bytes: int,
) -> tuple[NDArray[np.bool_], NDArray[np.uint8]]:
    if isinstance(transmissions, TransmissionBatch):
        return transmissions.payload_table()

    present = np.zeros(num_matchings, dtype=np.bool_)
    payloads = np.zeros((num_matchings, packet_bytes), dtype=np.uint8)
    for transmission in transmissions:
        present[transmission.matching_index] = True
        payloads[transmission.matching_index] = np.frombuffer(
            transmission.payload,
            dtype=np.uint8,
        )
    return present, payloads


def _graph_from_constituents(
    transmissions: Sequence[Transmission],
    *,
    num_packets: int,
    num_users: int,
) -> RsGraph:
    """Rebuild the matchings that a list of transmissions reveals."""
    num_matchings = max((t.matching_index for t in transmissions), default=-1) + 1
    matchings: list[list[tuple[int, int]]] = [[] for _ in range(num_matchings)]
    for transmission in transmissions:
        matchings[transmission.matching_index] = [
            (packet, user) for user, packet in transmission.constituents
        ]
    return RsGraph.from_matchings(
        num_packets=num_packets,
        num_users=num_users,
        matchings=matchings,
    )


def _check_received(user: int, cache: CacheState, graph: RsGraph) -> None:
    """Raise if an uncached packet appears in none of the received matchings.

    A graph rebuilt from received transmissions lacks the edges of dropped
    matchings, so the user's own cache is the reference for what it must receive.
    """
    uncovered = ~cache.mask
    uncovered[graph.packets[graph.users == user]] = False
    if uncovered.any():
        raise MissingTransmissionError(
            f"User {user} received no transmission carrying packets "
            f"{np.flatnonzero(uncovered).tolist()[:8]}",
        )


def _recover(  # noqa: PLR0913
    *,
    user: int,
    cache: CacheState,
    graph: RsGraph,
    present: NDArray[np.bool_],
    payloads: NDArray[np.uint8],
    demands: NDArray[np.int64],
    library: Library,
) -> NDArray[np.uint8]:
    demand = int(demands[user])
    num_packets = graph.num_packets
    output = np.empty((num_packets, library.packet_bytes), dtype=np.uint8)

    own = np.flatnonzero(graph.users == user)
    own_packets = graph.packets[own]

    from_cache = np.ones(num_packets, dtype=np.bool_)
    from_cache[own_packets] = False
    cached_packets = np.flatnonzero(from_cache)
    output[cached_packets] = cache.read(library, demand, cached_packets)

    if len(own) == 0:
        return output

    matchings = graph.edge_matching[own]
    if not present[matchings].all():
        missing = matchings[~present[matchings]]
        raise MissingTransmissionError(
            f"User {user} needs transmissions for matchings {missing.tolist()[:8]}",
        )

    # Expand every needed matching into its edges, then drop the user's own edge
    sizes = graph.matching_sizes[matchings]
    segment = np.repeat(np.arange(len(own)), sizes)
    offsets = np.arange(segment.size) - np.repeat(np.cumsum(sizes) - sizes, sizes)
    edges = np.repeat(graph.matching_ptr[matchings], sizes) + offsets
    keep = edges != np.repeat(own, sizes)
    edges, segment = edges[keep], segment[keep]

    side_packets = graph.packets[edges]
    side_files = demands[graph.users[edges]]
    real = side_files != DUMMY_FILE
    if not cache.mask[side_packets[real]].all():
        raise UndecodableError(
            f"User {user} lacks a side packet; some matching is not induced",
        )
    side = library.padded()[side_files, side_packets]

    recovered = payloads[matchings].copy()
    counts = np.bincount(segment, minlength=len(own))
    nonempty = counts > 0
    if side.size:
        starts = np.cumsum(counts) - counts
        recovered[nonempty] ^= np.bitwise_xor.reduceat(side, starts[nonempty], axis=0)

    output[own_packets] = recovered
    return output


@dataclass(frozen=True, kw_only=True)
class DeliveryReport:
    """Outcome of running placement, delivery and decoding for every user."""

    ok: bool
    """True when every user reconstructed its demanded file byte for byte."""

    transmission_count: int
    """The number of packet transmissions t."""

    rate: Fraction
    """Normalized rate t/F."""

    mismatched_bytes: dict[int, int] = field(default_factory=dict)
    """Users whose reconstruction differs, mapped to the number of wrong bytes."""

    errors: dict[int, str] = field(default_factory=dict)
    """Users whose decoder raised, mapped to the error message."""


def verify_delivery(  # noqa: PLR0913
    graph: RsGraph,
    library: Library,
    demands: DemandVector,
    *,
    transmissions: Sequence[Transmission] | None = None,
    blind: bool = False,
    users: Sequence[int] | None = None,
) -> DeliveryReport:
    """Check the successful delivery condition for every user.

    Args:
        graph: The scheme's graph.
        library: The files.
        demands: One demand per user.

    Keyword Args:
        transmissions: Use these instead of freshly delivered transmissions.
        blind: Decode from matching indices and payloads plus the public graph.
        users: Restrict decoding to these users.

    Raises:
        DimensionMismatchError: If the demands do not fit the graph and library,
            or name the dummy file.

    """
    demands.check(
        num_users=graph.num_users,
        num_files=library.num_files,
        allow_dummy=False,
    )
    caches = place(graph, library)
    if transmissions is None:
        transmissions = deliver(graph, library, demands)

    mismatched: dict[int, int] = {}
    errors: dict[int, str] = {}
    for user in range(graph.num_users) if users is None else users:
        demand = demands[user]
        try:
            decoded = decode(
                user,
                caches[user],
                transmissions,
                demands,
                library,
                graph=graph if blind else None,
            )
        except CodedCachingError as err:
            errors[user] = str(err)
            continue

        wrong = int(np.count_nonzero(decoded != library.file(demand)))
        if wrong:
            mismatched[user] = wrong

    if mismatched or errors:
        logger.debug(
            "Delivery failed for %d users",
            len(mismatched) + len(errors),
        )

    return DeliveryReport(
        ok=not mismatched and not errors,
        transmission_count=len(transmissions),
        rate=Fraction(len(transmissions), graph.num_packets),
        mismatched_bytes=mismatched,
        errors=errors,
    )


def dump_transmissions(
    transmissions: Sequence[Transmission],
    path: str | PathLike[str],
) -> None:
    """Write transmissions as JSON lines of matching index and hex payload."""
    with Path(path).open("w") as f:
        for transmission in transmissions:
            record = {
                "matching_index": transmission.matching_index,
                "payload": transmission.payload.hex(),
            }
            f.write(json.dumps(record) + "\n")


def load_transmissions(path: str | PathLike[str]) -> list[Transmission]:
    """Read transmissions written by `dump_transmissions`.

    The result carries no constituents; decode it with the public graph.
    """
    transmissions: list[Transmission] = []
    with Path(path).open() as f:
        for line in f:
            if not line.strip():
                continue
            record = json.loads(line)
            transmissions.append(
                Transmission(
                    matching_index=int(record["matching_index"]),
                    payload=bytes.fromhex(record["payload"]),
                ),
            )
    return transmissions
