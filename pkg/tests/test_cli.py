"""Tests for the rs-caching command line."""

from __future__ import annotations

import json
from typing import TYPE_CHECKING

import pytest

from rs_coded_caching import read_graph, validate_rs
from rs_coded_caching.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main

if TYPE_CHECKING:
    from pathlib import Path


@pytest.fixture
def tampered_graph(tmp_path: Path) -> Path:
    """A graph whose first matching is not induced."""
    path = tmp_path / "tampered.json"
    path.write_text(
        json.dumps({"F": 2, "K": 2, "matchings": [[[0, 0], [1, 1]], [[0, 1]]]}),
    )
    return path


class TestConstruct:
    """Tests for `rs-caching construct`."""

    def test_binomial(self, capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
        out = tmp_path / "graph.json"
        args = ["construct", "binomial", "--n", "6", "--a", "2"]
        code = main([*args, "--out", str(out)])
        assert code == EXIT_OK
        text = capsys.readouterr().out
        assert "0.6" in text
        assert "3/5" in text
        graph = read_graph(out)
        assert (graph.num_packets, graph.num_users, graph.num_matchings) == (15, 15, 15)
        assert validate_rs(graph).valid

    def test_mn(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["construct", "mn", "--k", "4", "--s", "2"]) == EXIT_OK
        assert "2/3" in capsys.readouterr().out

    def test_binomial_needs_room(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["construct", "binomial", "--n", "3", "--a", "2"]) == EXIT_USAGE
        assert "invalid configuration" in capsys.readouterr().err

    def test_unknown_family(self) -> None:
        with pytest.raises(SystemExit) as info:
            main(["construct", "hypercube"])
        assert info.value.code == EXIT_USAGE


class TestValidate:
    """Tests for `rs-caching validate`."""

    def test_valid(self, graph_file: Path, capsys: pytest.CaptureFixture[str]) -> None:
        assert main(["validate", str(graph_file)]) == EXIT_OK
        assert "True" in capsys.readouterr().out

    def test_tampered(
        self,
        tampered_graph: Path,
        capsys: pytest.CaptureFixture[str],
    ) -> None:
        assert main(["validate", str(tampered_graph)]) == EXIT_FAILURE
        assert "induced" in capsys.readouterr().out

    def test_missing_file(self, tmp_path: Path) -> None:
        assert main(["validate", str(tmp_path / "nope.json")]) == EXIT_USAGE


class TestCentralizedSim:
    """Tests for `rs-caching centralized-sim`."""

    def test_family(self, tmp_path: Path) -> None:
        out = tmp_path / "centralized.csv"
        code = main(
            [
                "centralized-sim",
                "--family",
                "binomial",
                "--n",
                "4",
                "--a",
                "1",
                "--trials",
                "3",
                "--out",
                str(out),
            ],
        )
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "# schema: rs-coded-caching/centralized v1"
        assert len(lines) == 2 + 3

    def test_graph_file_blind(self, graph_file: Path, tmp_path: Path) -> None:
        dump = tmp_path / "transmissions.jsonl"
        code = main(
            [
                "centralized-sim",
                "--graph",
                str(graph_file),
                "--blind",
                "--dump-transmissions",
                str(dump),
            ],
        )
        assert code == EXIT_OK
        assert dump.exists()

    def test_tampered_graph(
        self,
        tampered_graph: Path,
        capsys: pytest.CaptureFixture[str],
    ) -> None:
        assert main(["centralized-sim", "--graph", str(tampered_graph)]) == EXIT_FAILURE
        assert "refusing" in capsys.readouterr().err

    def test_no_source(self) -> None:
        assert main(["centralized-sim"]) == EXIT_USAGE


class TestDecentralizedSim:
    """Tests for `rs-caching decentralized-sim`."""

    def test_single_user(self, tmp_path: Path) -> None:
        """Test that one user needs one round at exactly the centralized rate."""
        out = tmp_path / "decentralized.json"
        code = main(
            [
                "decentralized-sim",
                "--users",
                "1",
                "--gain",
                "2",
                "--format",
                "json",
                "--out",
                str(out),
            ],
        )
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        (record,) = report["records"]
        assert record["round_count"] == 1
        assert record["naive_rate"] == 1.0
        assert record["decode_ok"]
        assert record["counts_ok"]

    def test_prune(self, tmp_path: Path) -> None:
        out = tmp_path / "decentralized.json"
        code = main(
            [
                "decentralized-sim",
                "--users",
                "30",
                "--gain",
                "3",
                "--prune",
                "--trials",
                "2",
                "--format",
                "json",
                "--out",
                str(out),
            ],
        )
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["status"] == "pass"
        for record in report["records"]:
            assert record["pruned_rate"] <= record["naive_rate"]

    def test_infeasible_budget(self, capsys: pytest.CaptureFixture[str]) -> None:
        code = main(
            [
                "decentralized-sim",
                "--users",
                "10",
                "--gain",
                "20",
                "--max-subpacketization",
                "10",
            ],
        )
        assert code == EXIT_USAGE
        assert "F <= 10" in capsys.readouterr().err


class TestBallsBins:
    """Tests for `rs-caching ballsbins` and `rs-caching churn-replay`."""

    def test_static(self, tmp_path: Path) -> None:
        out = tmp_path / "static.csv"
        code = main(
            ["ballsbins", "--balls", "1000", "--bins", "100", "--out", str(out)],
        )
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "# schema: rs-coded-caching/ballsbins-static v1"

    def test_churn_artifacts_replay(self, tmp_path: Path) -> None:
        series = tmp_path / "series.csv"
        histogram = tmp_path / "heights.json"
        events = tmp_path / "events.jsonl"
        code = main(
            [
                "ballsbins",
                "--mode",
                "churn",
                "--balls",
                "50",
                "--bins",
                "10",
                "--steps",
                "100",
                "--adversary",
                "random_fixed",
                "--check-heights",
                "--trials",
                "2",
                "--series",
                str(series),
                "--histogram",
                str(histogram),
                "--event-log",
                str(events),
            ],
        )
        assert code == EXIT_OK
        assert len(series.read_text().splitlines()) == 2 + 150
        assert json.loads(histogram.read_text())["mu"][0] == 50
        assert main(["churn-replay", str(events), "--audit-interval", "16"]) == EXIT_OK

    def test_replay_tampered_log(
        self,
        tmp_path: Path,
        capsys: pytest.CaptureFixture[str],
    ) -> None:
        events = tmp_path / "events.jsonl"
        main(
            [
                "ballsbins",
                "--mode",
                "churn",
                "--balls",
                "20",
                "--bins",
                "5",
                "--steps",
                "20",
                "--event-log",
                str(events),
            ],
        )
        lines = events.read_text().splitlines()
        record = json.loads(lines[3])
        record["loads_digest"] = "0" * 16
        lines[3] = json.dumps(record)
        events.write_text("\n".join(lines) + "\n")

        assert main(["churn-replay", str(events)]) == EXIT_FAILURE
        assert "line 4" in capsys.readouterr().err

    def test_explicit_duplicate_deletion(self) -> None:
        code = main(
            [
                "ballsbins",
                "--mode",
                "churn",
                "--balls",
                "3",
                "--bins",
                "2",
                "--steps",
                "2",
                "--adversary",
                "explicit",
                "--deletions",
                "1,1",
            ],
        )
        assert code == EXIT_USAGE

    def test_explicit_without_deletions(self) -> None:
        code = main(
            ["ballsbins", "--mode", "churn", "--balls", "3", "--bins", "2"]
            + ["--adversary", "explicit"],
        )
        assert code == EXIT_USAGE


class TestSubpacketization:
    """Tests for `rs-caching subpacketization`."""

    def test_table(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        out = tmp_path / "subpacketization.csv"
        assert main(["subpacketization", "--out", str(out)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "8568" in text
        assert "3108105" in text
        lines = out.read_text().splitlines()
        assert lines[0] == "# schema: rs-coded-caching/subpacketization v1"
        assert len(lines) == 2 + 4
