"""Enums used by rs_coded_caching."""

from enum import Enum

# ruff: noqa: D101


class Family(Enum):
    """Constructed Ruzsa-Szemerédi graph families."""

    MN = "mn"
    """Packets are s-subsets of the users; the canonical centralized scheme."""

    BINOMIAL = "binomial"
    """Packets are a-subsets of [n], users are 2-subsets of [n]."""


class DemandKind(Enum):
    """Demand vector generators."""

    DISTINCT = "distinct"
    UNIFORM = "uniform"
    CONSTANT = "constant"


class AdversaryKind(Enum):
    """Oblivious deletion strategies for the insert/delete process."""

    FIFO = "fifo"
    LIFO = "lifo"
    RANDOM_FIXED = "random_fixed"
    EXPLICIT = "explicit"


class OutputFormat(Enum):
    CSV = "csv"
    JSON = "json"


class ViolationKind(Enum):
    """Ways a graph can fail to be a Ruzsa-Szemerédi graph."""

    PARTITION = "partition"
    """An edge appears in more than one matching, or twice in one matching."""

    MATCHING = "matching"
    """Two edges of a matching share a packet or a user vertex."""

    INDUCED = "induced"
    """Two edges of a matching are joined by a graph edge outside the matching."""

    EMPTY = "empty"
    """A matching has no edges, or the graph has no matchings."""

    RANGE = "range"
    """An edge endpoint lies outside [F] x [K]."""


class ChurnOp(Enum):
    JOIN = "join"
    LEAVE = "leave"
