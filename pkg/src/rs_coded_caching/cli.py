"""Command-line interface: `rs-caching <subcommand>`."""

from __future__ import annotations

import argparse
import asyncio
import csv
import logging
import sys
import time
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from pydantic import ValidationError

from rs_coded_caching._ballsbins import DynamicResult, height_histogram
from rs_coded_caching._codec import deliver, dump_transmissions
from rs_coded_caching._config import (
    BallsBinsConfig,
    CentralizedConfig,
    ChurnReplayConfig,
    ConstructConfig,
    DecentralizedConfig,
    SubpacketizationConfig,
    ValidateConfig,
)
from rs_coded_caching._decentral import VirtualPool, place_all, run_churn
from rs_coded_caching._events import read_event_log, write_event_log
from rs_coded_caching._graph_io import read_graph, write_graph
from rs_coded_caching._kprime import select_kprime
from rs_coded_caching._library import Library, make_demands
from rs_coded_caching._replay import replay_events
from rs_coded_caching._report import (
    ExperimentReport,
    schema_line,
    write_histogram,
    write_series,
)
from rs_coded_caching._rsgraph import scheme_params, validate_rs
from rs_coded_caching._trials import (
    DEMAND_STREAM,
    LIBRARY_STREAM,
    ballsbins_run,
    ballsbins_trial,
    centralized_graph,
    centralized_trial,
    churn_script,
    decentralized_choice,
    decentralized_trial,
    derive_seed,
    family_graph,
    run_trials,
)
from rs_coded_caching._version import __version__
from rs_coded_caching.enums import AdversaryKind, DemandKind, Family, OutputFormat
from rs_coded_caching.exceptions import (
    CodedCachingError,
    InvalidGraphError,
)

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from rs_coded_caching._config import ExperimentConfig
    from rs_coded_caching._report import TrialRecord

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _int_list(value: str) -> tuple[int, ...]:
    return tuple(int(x) for x in value.split(",") if x.strip())


def _float_list(value: str) -> tuple[float, ...]:
    return tuple(float(x) for x in value.split(",") if x.strip())


def _common(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "seed": args.seed,
        "trials": args.trials,
        "out": args.out,
        "format": args.format,
        "workers": args.workers,
        "record_timing": args.record_timing,
    }


def _print_table(rows: Sequence[dict[str, Any]]) -> None:
    if not rows:
        return
    columns = list(rows[0])
    cells = [[str(row[c]) for c in columns] for row in rows]
    widths = [
        max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)
    ]
    print("  ".join(c.ljust(w) for c, w in zip(columns, widths, strict=True)))
    for r in cells:
        print("  ".join(v.ljust(w) for v, w in zip(r, widths, strict=True)))


def _emit(report: ExperimentReport, config: ExperimentConfig) -> int:
    if config.out is not None:
        report.write(config.out, config.format)
        logger.info("Wrote %s report to %s", report.kind, config.out)

    summary: dict[str, Any] = {"status": report.status}
    summary.update(
        {
            key: value
            for key, value in report.aggregate.model_dump().items()
            if value is not None and key != "wall_time"
        },
    )
    _print_table([summary])
    return EXIT_OK if report.status == "pass" else EXIT_FAILURE


def _run_experiment(
    kind: str,
    trial_fn: Callable[[Any, int], TrialRecord],
    config: ExperimentConfig,
) -> ExperimentReport:
    start = time.perf_counter()
    records = asyncio.run(run_trials(trial_fn, config))
    wall_time = time.perf_counter() - start
    logger.info("%s: %d trials in %.2fs", kind, len(records), wall_time)
    return ExperimentReport.from_records(
        kind=kind,
        config=config.model_dump(mode="json"),
        records=records,
        wall_time=wall_time if config.record_timing else None,
    )


def cmd_construct(args: argparse.Namespace) -> int:
    """Build a family instance, write it and print its scheme parameters."""
    config = ConstructConfig(
        **_common(args),
        family=args.family,
        n=args.n,
        a=args.a,
        k=args.k,
        s=args.s,
    )
    graph = family_graph(config.family, *config.params())
    if config.out is not None:
        write_graph(graph, config.out)
        logger.info("Wrote graph to %s", config.out)

    params = scheme_params(graph, validate=False)
    _print_table(
        [
            {
                "F": graph.num_packets,
                "K": graph.num_users,
                "t": graph.num_matchings,
                "r": params.avg_matching_size,
                "c": params.min_right_degree,
                "rate": float(params.rate),
                "rate_exact": params.rate,
                "memory_ratio": float(params.memory_ratio),
                "memory_ratio_exact": params.memory_ratio,
            },
        ],
    )
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    """Check a graph file and print the validation report."""
    config = ValidateConfig(**_common(args), graph=args.graph)
    report = validate_rs(read_graph(config.graph))
    row: dict[str, Any] = {
        "valid": report.valid,
        "F": report.num_packets,
        "K": report.num_users,
        "t": report.num_matchings,
    }
    if report.valid:
        row["r"] = report.avg_matching_size
        row["c"] = report.min_right_degree
    _print_table([row])
    for violation in report.violations[:20]:
        print(
            f"{violation.kind.value} at matching {violation.matching_index}: "
            f"{violation.detail}",
        )
    return EXIT_OK if report.valid else EXIT_FAILURE


def cmd_centralized(args: argparse.Namespace) -> int:
    """Verify end-to-end delivery of a centralized scheme."""
    config = CentralizedConfig(
        **_common(args),
        graph=args.graph,
        family=args.family,
        n=args.n,
        a=args.a,
        k=args.k,
        s=args.s,
        num_files=args.files,
        packet_bytes=args.packet_bytes,
        demand=args.demand,
        blind=args.blind,
        dump_transmissions=args.dump_transmissions,
    )
    graph = centralized_graph(config)
    validation = validate_rs(graph)
    if not validation.valid:
        print(
            "Graph is not Ruzsa-Szemerédi; refusing to run delivery "
            f"({len(validation.violations)} violations)",
            file=sys.stderr,
        )
        return EXIT_FAILURE

    report = _run_experiment("centralized", centralized_trial, config)

    if config.dump_transmissions is not None:
        library = Library.generate(
            num_files=config.num_files,
            num_packets=graph.num_packets,
            packet_bytes=config.packet_bytes,
            seed=derive_seed(config.seed, 0, LIBRARY_STREAM),
        )
        demands = make_demands(
            config.demand,
            num_users=graph.num_users,
            num_files=config.num_files,
            rng=np.random.default_rng(derive_seed(config.seed, 0, DEMAND_STREAM)),
        )
        dump_transmissions(deliver(graph, library, demands), config.dump_transmissions)

    return _emit(report, config)


def cmd_decentralized(args: argparse.Namespace) -> int:
    """Run decentralized placement and delivery trials."""
    config = DecentralizedConfig(
        **_common(args),
        num_users=args.users,
        gain=args.gain,
        memory_ratio=args.memory_ratio,
        centralized_rate=args.rate,
        exponent=args.delta,
        family=args.family,
        max_subpacketization=args.max_subpacketization,
        num_files=args.files,
        packet_bytes=args.packet_bytes,
        demand=args.demand,
        choices=args.choices,
        prune=args.prune,
        decode_limit=args.decode_users,
    )
    choice = decentralized_choice(config)
    logger.info(
        "K'=%d realized by %s%s with %d virtual users, F=%s",
        choice.k_prime,
        choice.family.value if choice.family else "-",
        choice.construction_params,
        choice.num_virtual_users,
        choice.subpacketization,
    )
    report = _run_experiment("decentralized", decentralized_trial, config)
    return _emit(report, config)


def cmd_ballsbins(args: argparse.Namespace) -> int:
    """Run the static or churn balls-and-bins process."""
    config = BallsBinsConfig(
        **_common(args),
        mode=args.mode,
        num_balls=args.balls,
        num_bins=args.bins,
        churn_steps=args.steps,
        adversary=args.adversary,
        adversary_seed=args.adversary_seed,
        deletions=args.deletions,
        choices=args.choices,
        slack=args.slack,
        check_heights=args.check_heights,
        series=args.series,
        histogram=args.histogram,
        event_log=args.event_log,
    )
    # Scripts are fixed before any trial runs, so invalid ones fail fast
    if config.mode == "churn":
        churn_script(config, 0)

    report = _run_experiment(f"ballsbins-{config.mode}", ballsbins_trial, config)

    if config.series or config.histogram:
        result = ballsbins_run(config, 0)
        state = result.state if isinstance(result, DynamicResult) else result
        if config.series is not None and isinstance(result, DynamicResult):
            write_series(config.series, result)
        elif config.series is not None:
            logger.warning("Max-load series are only written in churn mode")
        if config.histogram is not None:
            write_histogram(config.histogram, height_histogram(state))

    if config.event_log is not None:
        pool = VirtualPool.detached(
            num_virtual_users=config.num_bins,
            population_cap=config.num_balls,
            choices=config.choices,
        )
        script = churn_script(config, 0) if config.mode == "churn" else None
        rng = np.random.default_rng(derive_seed(config.seed, 0))
        if script is not None:
            run_churn(pool, script, rng)
        else:
            place_all(pool, config.num_balls, rng)
        write_event_log(
            config.event_log,
            pool.events or [],
            num_virtual_users=config.num_bins,
            population_cap=config.num_balls,
        )

    return _emit(report, config)


def cmd_churn_replay(args: argparse.Namespace) -> int:
    """Replay a pool event log and audit it."""
    config = ChurnReplayConfig(
        **_common(args),
        event_log=args.event_log,
        graph=args.graph,
        audit_interval=args.audit_interval,
    )
    log = read_event_log(config.event_log)
    graph = read_graph(config.graph) if config.graph is not None else None
    result = replay_events(log, graph=graph, audit_interval=config.audit_interval)

    _print_table(
        [
            {
                "joins": result.joins,
                "leaves": result.leaves,
                "population": result.pool.population,
                "bits_per_join": result.pool.bits_per_join,
                "bits_overhead": result.bits_overhead,
                "audit": "pass" if result.ok else "fail",
            },
        ],
    )
    if result.failure is not None:
        print(f"audit failed: {result.failure}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_subpacketization(args: argparse.Namespace) -> int:
    """Tabulate the realized instance for each coding gain."""
    config = SubpacketizationConfig(
        **_common(args),
        gains=args.gains,
        memory_ratio=args.memory_ratio,
        centralized_rate=args.rate,
        exponent=args.delta,
        family=args.family,
        max_subpacketization=args.max_subpacketization,
    )
    rows: list[dict[str, Any]] = []
    for gain in config.gains:
        choice = select_kprime(
            gain,
            config.memory_ratio,
            config.centralized_rate,
            config.exponent,
            family=config.family,
            max_subpacketization=config.max_subpacketization,
        )
        first, second = choice.construction_params or (None, None)
        rows.append(
            {
                "g": gain,
                "first": first,
                "second": second,
                "k_prime": choice.k_prime,
                "virtual_users": choice.num_virtual_users,
                "F": choice.subpacketization,
                "rate": choice.realized_rate,
                "memory_ratio": choice.realized_memory_ratio,
            },
        )
    _print_table(rows)

    if config.out is not None:
        with config.out.open("w", newline="") as f:
            f.write(schema_line("subpacketization") + "\n")
            writer = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    return EXIT_OK


def _add_family_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, help="Ground set size of the binomial family")
    parser.add_argument(
        "--a",
        type=int,
        help="Packet subset size of the binomial family",
    )
    parser.add_argument("--k", type=int, help="Number of users of the mn family")
    parser.add_argument("--s", type=int, help="Cached subset size of the mn family")


def _add_library_params(parser: argparse.ArgumentParser, demand: DemandKind) -> None:
    parser.add_argument("--files", type=int, default=8, help="Number of files N")
    parser.add_argument("--packet-bytes", type=int, default=64, help="Packet size B")
    parser.add_argument(
        "--demand",
        choices=[d.value for d in DemandKind],
        default=demand.value,
    )


def _add_selection_params(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--memory-ratio", type=float, default=0.5, help="M/N")
    parser.add_argument("--rate", type=float, help="R_c; realized value if omitted")
    parser.add_argument("--delta", type=float, default=0.0, help="Rate exponent")
    parser.add_argument(
        "--family",
        choices=[f.value for f in Family],
        default=Family.BINOMIAL.value,
    )
    parser.add_argument("--max-subpacketization", type=int, default=1 << 22)


def build_parser() -> argparse.ArgumentParser:
    """The CLI's argument parser."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Master seed")
    common.add_argument("--trials", type=int, default=1)
    common.add_argument("--out", type=Path, help="Output file")
    common.add_argument(
        "--format",
        choices=[f.value for f in OutputFormat],
        default=OutputFormat.CSV.value,
    )
    common.add_argument("--workers", type=int, default=1, help="Worker processes")
    common.add_argument(
        "--record-timing",
        action="store_true",
        help="Include wall times in reports",
    )
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="rs-caching",
        description="Ruzsa-Szemerédi coded caching experiments.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    construct = sub.add_parser(
        "construct",
        parents=[common],
        help=cmd_construct.__doc__,
    )
    construct.add_argument("family", choices=[f.value for f in Family])
    _add_family_params(construct)
    construct.set_defaults(handler=cmd_construct)

    validate = sub.add_parser("validate", parents=[common], help=cmd_validate.__doc__)
    validate.add_argument("graph", type=Path)
    validate.set_defaults(handler=cmd_validate)

    centralized = sub.add_parser(
        "centralized-sim",
        parents=[common],
        help=cmd_centralized.__doc__,
    )
    centralized.add_argument("--graph", type=Path, help="Graph file")
    centralized.add_argument("--family", choices=[f.value for f in Family])
    _add_family_params(centralized)
    _add_library_params(centralized, DemandKind.DISTINCT)
    centralized.add_argument("--blind", action="store_true")
    centralized.add_argument("--dump-transmissions", type=Path)
    centralized.set_defaults(handler=cmd_centralized)

    decentralized = sub.add_parser(
        "decentralized-sim",
        parents=[common],
        help=cmd_decentralized.__doc__,
    )
    decentralized.add_argument("--users", type=int, required=True, help="K")
    decentralized.add_argument("--gain", type=float, required=True, help="g")
    _add_selection_params(decentralized)
    _add_library_params(decentralized, DemandKind.UNIFORM)
    decentralized.add_argument("--choices", type=int, default=2)
    decentralized.add_argument("--prune", action="store_true")
    decentralized.add_argument(
        "--decode-users",
        type=int,
        help="Decode at most this many users per round",
    )
    decentralized.set_defaults(handler=cmd_decentralized)

    ballsbins = sub.add_parser(
        "ballsbins",
        parents=[common],
        help=cmd_ballsbins.__doc__,
    )
    ballsbins.add_argument("--mode", choices=["static", "churn"], default="static")
    ballsbins.add_argument("--balls", type=int, required=True, help="K")
    ballsbins.add_argument("--bins", type=int, required=True, help="K'")
    ballsbins.add_argument("--steps", type=int, default=0, help="T churn steps")
    ballsbins.add_argument(
        "--adversary",
        choices=[a.value for a in AdversaryKind],
        default=AdversaryKind.FIFO.value,
    )
    ballsbins.add_argument("--adversary-seed", type=int)
    ballsbins.add_argument(
        "--deletions",
        type=_int_list,
        help="Comma-separated v for the explicit adversary",
    )
    ballsbins.add_argument("--choices", type=int, default=2)
    ballsbins.add_argument("--slack", type=float, default=20.0)
    ballsbins.add_argument("--check-heights", action="store_true")
    ballsbins.add_argument("--series", type=Path)
    ballsbins.add_argument("--histogram", type=Path)
    ballsbins.add_argument("--event-log", type=Path)
    ballsbins.set_defaults(handler=cmd_ballsbins)

    replay = sub.add_parser(
        "churn-replay",
        parents=[common],
        help=cmd_churn_replay.__doc__,
    )
    replay.add_argument("event_log", type=Path)
    replay.add_argument("--graph", type=Path)
    replay.add_argument("--audit-interval", type=int, default=64)
    replay.set_defaults(handler=cmd_churn_replay)

    subpacketization = sub.add_parser(
        "subpacketization",
        parents=[common],
        help=cmd_subpacketization.__doc__,
    )
    subpacketization.add_argument(
        "--gains",
        type=_float_list,
        default=(5.0, 10.0, 20.0, 40.0),
    )
    _add_selection_params(subpacketization)
    subpacketization.set_defaults(handler=cmd_subpacketization)

    return parser


def _configure_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit status."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)

    try:
        return args.handler(args)
    except ValidationError as err:
        print(f"error: invalid configuration\n{err}", file=sys.stderr)
    except InvalidGraphError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILURE
    except (CodedCachingError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
    return EXIT_USAGE
