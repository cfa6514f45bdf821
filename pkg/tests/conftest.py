from __future__ import annotations

from typing import TYPE_CHECKING, Protocol

import numpy as np
import pytest

from rs_coded_caching import (
    Library,
    RsGraph,
    VirtualPool,
    construct_binomial,
    construct_mn,
    write_graph,
)

if TYPE_CHECKING:
    from pathlib import Path


class MakeLibrary(Protocol):
    def __call__(
        self,
        graph: RsGraph,
        *,
        num_files: int = 8,
        packet_bytes: int = 16,
        seed: int = 0,
    ) -> Library: ...


class MakePool(Protocol):
    def __call__(
        self,
        graph: RsGraph,
        *,
        population_cap: int = 1024,
        record_events: bool = True,
    ) -> VirtualPool: ...


@pytest.fixture(scope="session")
def binomial_4_1() -> RsGraph:
    """F=4, K=6, t=4: the smallest binomial instance."""
    return construct_binomial(4, 1)


@pytest.fixture(scope="session")
def binomial_6_2() -> RsGraph:
    return construct_binomial(6, 2)


@pytest.fixture(scope="session")
def mn_4_2() -> RsGraph:
    return construct_mn(4, 2)


@pytest.fixture(scope="session")
def non_induced() -> RsGraph:
    """One matching {(0,0), (1,1)} plus a second matching holding the edge (0,1)."""
    return RsGraph.from_matchings(
        num_packets=2,
        num_users=2,
        matchings=[[(0, 0), (1, 1)], [(0, 1)]],
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def make_library() -> MakeLibrary:
    def _make(
        graph: RsGraph,
        *,
        num_files: int = 8,
        packet_bytes: int = 16,
        seed: int = 0,
    ) -> Library:
        return Library.generate(
            num_files=num_files,
            num_packets=graph.num_packets,
            packet_bytes=packet_bytes,
            seed=seed,
        )

    return _make


@pytest.fixture
def make_pool() -> MakePool:
    def _make(
        graph: RsGraph,
        *,
        population_cap: int = 1024,
        record_events: bool = True,
    ) -> VirtualPool:
        return VirtualPool.create(
            graph,
            population_cap=population_cap,
            record_events=record_events,
        )

    return _make


@pytest.fixture
def graph_file(tmp_path: Path, binomial_4_1: RsGraph) -> Path:
    """A valid graph written to disk."""
    path = tmp_path / "binomial_4_1.json"
    write_graph(binomial_4_1, path)
    return path
