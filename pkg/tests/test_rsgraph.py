"""Tests for graph construction, validation and scheme parameters."""

from __future__ import annotations

from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rs_coded_caching import (
    RsGraph,
    construct_binomial,
    construct_mn,
    scheme_params,
    validate_rs,
)
from rs_coded_caching.enums import ViolationKind
from rs_coded_caching.exceptions import InvalidGraphError, ParameterOutOfRangeError

from .instances import BINOMIAL_INSTANCES, MN_INSTANCES


class TestConstructBinomial:
    """Tests for construct_binomial()."""

    def test_n4_a1(self, binomial_4_1: RsGraph) -> None:
        """Test counts of the smallest instance."""
        assert binomial_4_1.num_packets == 4
        assert binomial_4_1.num_users == 6
        assert binomial_4_1.num_matchings == 4
        assert binomial_4_1.matching_sizes.tolist() == [3, 3, 3, 3]
        assert binomial_4_1.num_edges == 12

    def test_n6_a2(self, binomial_6_2: RsGraph) -> None:
        """Test counts, rate and memory ratio of (6, 2)."""
        assert binomial_6_2.num_packets == 15
        assert binomial_6_2.num_users == 15
        assert binomial_6_2.num_matchings == 15
        assert set(binomial_6_2.matching_sizes.tolist()) == {6}
        assert binomial_6_2.num_edges == 90

        params = scheme_params(binomial_6_2)
        assert params.memory_ratio == Fraction(3, 5)
        assert params.rate == 1

    def test_a_plus_two_exceeds_n(self) -> None:
        """Test that a + 2 > n is rejected."""
        with pytest.raises(ParameterOutOfRangeError, match="a \\+ 2 <= n"):
            construct_binomial(3, 2)

    def test_a_zero(self) -> None:
        with pytest.raises(ParameterOutOfRangeError):
            construct_binomial(5, 0)

    def test_labels_are_one_based_subsets(self, binomial_4_1: RsGraph) -> None:
        """Test that labels enumerate subsets of [n] in colex order."""
        assert binomial_4_1.packet_labels == ((1,), (2,), (3,), (4,))
        assert binomial_4_1.user_labels == (
            (1, 2),
            (1, 3),
            (2, 3),
            (1, 4),
            (2, 4),
            (3, 4),
        )

    def test_edges_join_disjoint_subsets(self, binomial_6_2: RsGraph) -> None:
        """Test that every edge joins an a-subset to a disjoint 2-subset."""
        assert binomial_6_2.packet_labels is not None
        assert binomial_6_2.user_labels is not None
        for index, matching in enumerate(binomial_6_2.iter_matchings()):
            union: set[int] = set()
            for packet, user in matching:
                a_set = set(binomial_6_2.packet_labels[packet])
                pair = set(binomial_6_2.user_labels[user])
                assert not a_set & pair
                union |= a_set | pair
            assert len(union) == 4, f"matching {index} spans {union}"

    def test_edges_sorted_by_packet(self, binomial_6_2: RsGraph) -> None:
        for matching in binomial_6_2.iter_matchings():
            packets = [packet for packet, _ in matching]
            assert packets == sorted(packets)

    @pytest.mark.parametrize(("n", "a"), BINOMIAL_INSTANCES)
    def test_counting_identity(self, n: int, a: int) -> None:
        """Test t * C(a+2, 2) = K * C(n-2, a) and the closed-form counts."""
        graph = construct_binomial(n, a)
        assert graph.num_packets == comb(n, a)
        assert graph.num_users == comb(n, 2)
        assert graph.num_matchings == comb(n, a + 2)
        assert graph.num_matchings * comb(a + 2, 2) == graph.num_users * comb(n - 2, a)
        assert graph.num_edges == graph.num_users * comb(n - 2, a)


class TestConstructMN:
    """Tests for construct_mn()."""

    def test_k4_s2(self, mn_4_2: RsGraph) -> None:
        assert mn_4_2.num_packets == 6
        assert mn_4_2.num_matchings == 4
        params = scheme_params(mn_4_2)
        assert params.rate == Fraction(2, 3)
        assert params.rate == Fraction(4 - 2, 2 + 1)
        assert params.memory_ratio == Fraction(1, 2)

    def test_k2_s1(self) -> None:
        """Test the two-user case: one matching of two crossing edges."""
        graph = construct_mn(2, 1)
        assert graph.num_packets == 2
        assert graph.num_matchings == 1
        assert scheme_params(graph).rate == Fraction(1, 2)
        # packet {2} goes to user 1 and packet {1} to user 2
        assert graph.matching(0) == [(0, 1), (1, 0)]
        assert graph.packet_labels == ((1,), (2,))

    def test_s_equals_k(self) -> None:
        with pytest.raises(ParameterOutOfRangeError, match="1 <= s < K"):
            construct_mn(3, 3)

    @pytest.mark.parametrize(("k", "s"), MN_INSTANCES)
    def test_rate_formula(self, k: int, s: int) -> None:
        """Test that t/F equals (K - s)/(s + 1)."""
        params = scheme_params(construct_mn(k, s))
        assert params.rate == Fraction(k - s, s + 1)
        assert params.memory_ratio == Fraction(s, k)


class TestValidateRs:
    """Tests for validate_rs()."""

    def test_binomial_4_1(self, binomial_4_1: RsGraph) -> None:
        report = validate_rs(binomial_4_1)
        assert report.valid
        assert report.violations == ()
        assert report.num_matchings == 4
        assert report.avg_matching_size == 3
        assert report.min_right_degree == 2

    def test_induced_violation(self, non_induced: RsGraph) -> None:
        """Test that an edge between two edges of a matching is reported."""
        report = validate_rs(non_induced)
        assert not report.valid
        induced = report.violations_of(ViolationKind.INDUCED)
        assert [v.matching_index for v in induced] == [0]

    def test_single_edge(self) -> None:
        graph = RsGraph.from_matchings(num_packets=1, num_users=1, matchings=[[(0, 0)]])
        report = validate_rs(graph)
        assert report.valid
        assert report.num_matchings == 1
        assert report.avg_matching_size == 1

    def test_repeated_edge(self) -> None:
        """Test that an edge in two matchings breaks the partition."""
        graph = RsGraph.from_matchings(
            num_packets=2,
            num_users=2,
            matchings=[[(0, 0)], [(0, 0), (1, 1)]],
        )
        report = validate_rs(graph)
        assert not report.valid
        assert report.violations_of(ViolationKind.PARTITION)

    def test_shared_vertex(self) -> None:
        graph = RsGraph.from_matchings(
            num_packets=2,
            num_users=2,
            matchings=[[(0, 0), (0, 1)]],
        )
        report = validate_rs(graph)
        kinds = {v.kind for v in report.violations}
        assert ViolationKind.MATCHING in kinds

    def test_out_of_range(self) -> None:
        graph = RsGraph.from_matchings(num_packets=2, num_users=2, matchings=[[(5, 0)]])
        report = validate_rs(graph)
        assert [v.kind for v in report.violations] == [ViolationKind.RANGE]

    def test_empty(self) -> None:
        graph = RsGraph.from_matchings(num_packets=1, num_users=1, matchings=[])
        report = validate_rs(graph)
        assert not report.valid
        assert report.violations_of(ViolationKind.EMPTY)

    @pytest.mark.parametrize(("n", "a"), BINOMIAL_INSTANCES)
    def test_binomial_family(self, n: int, a: int) -> None:
        assert validate_rs(construct_binomial(n, a)).valid

    @pytest.mark.parametrize(("k", "s"), MN_INSTANCES)
    def test_mn_family(self, k: int, s: int) -> None:
        assert validate_rs(construct_mn(k, s)).valid


class TestSchemeParams:
    """Tests for scheme_params()."""

    def test_binomial_4_1(self, binomial_4_1: RsGraph) -> None:
        params = scheme_params(binomial_4_1)
        assert params.rate == 1
        assert params.memory_ratio == Fraction(1, 2)
        assert params.min_right_degree == 2
        assert params.subpacketization == 4

    def test_full_degree_user(self) -> None:
        """Test that a user adjacent to every packet caches nothing."""
        graph = RsGraph.from_matchings(num_packets=1, num_users=1, matchings=[[(0, 0)]])
        assert scheme_params(graph).memory_ratio == 0

    def test_invalid_graph(self, non_induced: RsGraph) -> None:
        with pytest.raises(InvalidGraphError, match="not Ruzsa-Szemer"):
            scheme_params(non_induced)

    def test_isolated_user(self) -> None:
        """Test that a user without edges is rejected."""
        graph = RsGraph.from_matchings(num_packets=1, num_users=2, matchings=[[(0, 0)]])
        with pytest.raises(InvalidGraphError, match="no edges"):
            scheme_params(graph)


class TestRsGraph:
    """Tests for the RsGraph container."""

    def test_mismatched_arrays(self) -> None:
        with pytest.raises(InvalidGraphError, match="equal length"):
            RsGraph(
                num_packets=1,
                num_users=1,
                packets=np.zeros(2, dtype=np.int64),
                users=np.zeros(1, dtype=np.int64),
                matching_ptr=np.array([0, 1], dtype=np.int64),
            )

    def test_bad_offsets(self) -> None:
        with pytest.raises(InvalidGraphError, match="cover"):
            RsGraph(
                num_packets=1,
                num_users=1,
                packets=np.zeros(2, dtype=np.int64),
                users=np.zeros(2, dtype=np.int64),
                matching_ptr=np.array([0, 1], dtype=np.int64),
            )

    def test_neighborhood(self, binomial_4_1: RsGraph) -> None:
        """Test that user {1,2} is adjacent to packets {3} and {4}."""
        assert binomial_4_1.user_labels is not None
        user = binomial_4_1.user_labels.index((1, 2))
        assert binomial_4_1.neighborhood(user).tolist() == [2, 3]

    def test_edge_matching(self, mn_4_2: RsGraph) -> None:
        assert mn_4_2.edge_matching.tolist() == [0] * 3 + [1] * 3 + [2] * 3 + [3] * 3


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=3, max_value=9).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(min_value=1, max_value=n - 2)),
))
def test_binomial_degrees_are_regular(params: tuple[int, int]) -> None:
    """Every user of a binomial instance has degree C(n-2, a)."""
    n, a = params
    graph = construct_binomial(n, a)
    assert set(graph.user_degrees().tolist()) == {comb(n - 2, a)}
    assert scheme_params(graph, validate=False).min_right_degree == comb(n - 2, a)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(0, 3), st.integers(0, 3)),
        min_size=1,
        max_size=6,
        unique=True,
    ),
)
def test_single_matching_validity(edges: list[tuple[int, int]]) -> None:
    """A lone matching is valid exactly when its edges share no vertex."""
    graph = RsGraph.from_matchings(num_packets=4, num_users=4, matchings=[edges])
    packets = [p for p, _ in edges]
    users = [u for _, u in edges]
    disjoint = len(set(packets)) == len(packets) and len(set(users)) == len(users)
    assert validate_rs(graph).valid == disjoint
