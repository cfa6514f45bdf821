"""Seeded trials of every experiment and their concurrent execution."""

from __future__ import annotations

import asyncio
import functools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import TYPE_CHECKING, TypeVar

import numpy as np

from rs_coded_caching._ballsbins import (
    DynamicResult,
    bound_dynamic,
    bound_static,
    make_adversary,
    run_dynamic,
    run_static,
)
from rs_coded_caching._codec import verify_delivery
from rs_coded_caching._decentral import (
    VirtualPool,
    build_rounds,
    deliver_decentralized,
    measure_rate,
    place_all,
)
from rs_coded_caching._graph_io import read_graph
from rs_coded_caching._kprime import KPrimeChoice, select_kprime
from rs_coded_caching._library import Library, make_demands
from rs_coded_caching._report import TrialRecord
from rs_coded_caching._rsgraph import construct_binomial, construct_mn, scheme_params
from rs_coded_caching.enums import Family

if TYPE_CHECKING:
    from collections.abc import Callable

    from rs_coded_caching._ballsbins import BinsState, ChurnScript
    from rs_coded_caching._config import (
        BallsBinsConfig,
        CentralizedConfig,
        DecentralizedConfig,
        ExperimentConfig,
    )
    from rs_coded_caching._rsgraph import RsGraph

logger = logging.getLogger(__name__)

C = TypeVar("C", bound="ExperimentConfig")

LIBRARY_STREAM = 1
DEMAND_STREAM = 2
ADVERSARY_STREAM = 3


def derive_seed(master_seed: int, *keys: int) -> int:
    """Mix a master seed with integer keys into a 63-bit seed.

    The trial seed is `derive_seed(master_seed, trial)`; auxiliary streams of a
    trial append a stream key. The mixing is numpy's `SeedSequence`, so it does
    not depend on the order in which trials run.
    """
    state = np.random.SeedSequence([master_seed, *keys]).generate_state(
        1,
        dtype=np.uint64,
    )
    return int(state[0] >> np.uint64(1))


@functools.cache
def family_graph(family: Family, first: int, second: int) -> RsGraph:
    """Construct a family instance once per process."""
    if family == Family.BINOMIAL:
        return construct_binomial(first, second)
    return construct_mn(first, second)


def _timed(record: TrialRecord, start: float, *, enabled: bool) -> TrialRecord:
    elapsed = time.perf_counter() - start
    logger.debug("Trial %d took %.3fs", record.trial, elapsed)
    if not enabled:
        return record
    return record.model_copy(update={"wall_time": elapsed})


def centralized_graph(config: CentralizedConfig) -> RsGraph:
    """The graph a centralized run uses: from file or constructed."""
    if config.graph is not None:
        return read_graph(config.graph)
    if config.family is None:
        raise ValueError("No graph source configured")
    return family_graph(config.family, *config.params())


def centralized_trial(config: CentralizedConfig, trial: int) -> TrialRecord:
    """Verify delivery of one random library and demand vector."""
    start = time.perf_counter()
    seed = derive_seed(config.seed, trial)
    graph = centralized_graph(config)
    params = scheme_params(graph)

    library = Library.generate(
        num_files=config.num_files,
        num_packets=graph.num_packets,
        packet_bytes=config.packet_bytes,
        seed=derive_seed(config.seed, trial, LIBRARY_STREAM),
    )
    demands = make_demands(
        config.demand,
        num_users=graph.num_users,
        num_files=config.num_files,
        rng=np.random.default_rng(derive_seed(config.seed, trial, DEMAND_STREAM)),
    )
    report = verify_delivery(graph, library, demands, blind=config.blind)

    record = TrialRecord(
        trial=trial,
        seed=seed,
        naive_rate=float(report.rate),
        naive_rate_exact=str(report.rate),
        decode_ok=report.ok,
        counts_ok=report.rate == params.rate,
        round_count=1,
    )
    return _timed(record, start, enabled=config.record_timing)


def decentralized_choice(config: DecentralizedConfig) -> KPrimeChoice:
    """Select K' and its realizing instance for a decentralized run."""
    return select_kprime(
        config.gain,
        config.memory_ratio,
        config.centralized_rate,
        config.exponent,
        family=config.family,
        max_subpacketization=config.max_subpacketization,
    )


def decentralized_trial(config: DecentralizedConfig, trial: int) -> TrialRecord:
    """Place K users, deliver in rounds, decode and measure the rate."""
    start = time.perf_counter()
    seed = derive_seed(config.seed, trial)
    choice = decentralized_choice(config)
    if choice.family is None or choice.construction_params is None:
        raise ValueError("K' selection did not realize an instance")
    graph = family_graph(choice.family, *choice.construction_params)

    pool = VirtualPool.create(
        graph,
        population_cap=config.num_users,
        choices=config.choices,
        record_events=False,
    )
    place_all(pool, config.num_users, np.random.default_rng(seed))

    library = Library.generate(
        num_files=config.num_files,
        num_packets=graph.num_packets,
        packet_bytes=config.packet_bytes,
        seed=derive_seed(config.seed, trial, LIBRARY_STREAM),
    )
    demands = make_demands(
        config.demand,
        num_users=config.num_users,
        num_files=config.num_files,
        rng=np.random.default_rng(derive_seed(config.seed, trial, DEMAND_STREAM)),
    )
    plan = build_rounds(pool, demands)
    delivery = deliver_decentralized(
        pool,
        library,
        plan,
        prune=config.prune,
        decode_limit=config.decode_limit,
    )
    rate = measure_rate(pool, plan, graph, gain=config.gain)

    max_load = pool.max_load if pool.population else 0
    record = TrialRecord(
        trial=trial,
        seed=seed,
        max_load=max_load,
        naive_rate=float(rate.naive_rate),
        naive_rate_exact=str(rate.naive_rate),
        pruned_rate=float(rate.pruned_rate),
        decode_ok=delivery.decode_ok,
        counts_ok=delivery.naive_transmission_count == graph.num_matchings * max_load,
        bits_overhead=pool.bits_overhead,
        round_count=plan.num_rounds,
        bound=rate.bound,
        within_bound=rate.naive_rate <= rate.bound if rate.bound is not None else None,
    )
    return _timed(record, start, enabled=config.record_timing)


def churn_script(config: BallsBinsConfig, trial: int) -> ChurnScript:
    """The adversary's script for one trial."""
    adversary_seed = (
        config.adversary_seed
        if config.adversary_seed is not None
        else derive_seed(config.seed, trial, ADVERSARY_STREAM)
    )
    return make_adversary(
        config.adversary,
        config.num_balls,
        config.churn_steps,
        seed=adversary_seed,
        deletions=config.deletions,
    )


def ballsbins_run(config: BallsBinsConfig, trial: int) -> BinsState | DynamicResult:
    """Run the configured process for one trial."""
    rng = np.random.default_rng(derive_seed(config.seed, trial))
    if config.mode == "static":
        return run_static(
            config.num_balls,
            config.num_bins,
            rng,
            choices=config.choices,
        )
    return run_dynamic(
        churn_script(config, trial),
        config.num_bins,
        rng,
        choices=config.choices,
        check_heights=config.check_heights,
    )


def ballsbins_trial(config: BallsBinsConfig, trial: int) -> TrialRecord:
    """Record the max load of one run against its bound."""
    start = time.perf_counter()
    result = ballsbins_run(config, trial)

    bound: float | None = None
    within: bool | None = None
    if isinstance(result, DynamicResult):
        max_load = result.state.max_load_seen
        violations = result.height_violations
        if config.num_bins >= 3:  # noqa: PLR2004
            bound = bound_dynamic(config.num_balls, config.num_bins, slack=config.slack)
            within = max_load <= bound
    else:
        max_load = result.max_load_seen
        violations = None
        if config.num_bins >= 3:  # noqa: PLR2004
            bound = bound_static(config.num_balls, config.num_bins)
            within = max_load < bound

    record = TrialRecord(
        trial=trial,
        seed=derive_seed(config.seed, trial),
        max_load=max_load,
        height_violations=violations,
        bound=bound,
        within_bound=within,
    )
    return _timed(record, start, enabled=config.record_timing)


async def run_trials(
    trial_fn: Callable[[C, int], TrialRecord],
    config: C,
) -> list[TrialRecord]:
    """Run `config.trials` trials and return their records in trial order.

    With more than one worker, trials run in a process pool and are gathered as
    they finish; each trial depends only on its config and index.
    """
    if config.workers == 1:
        return [trial_fn(config, trial) for trial in range(config.trials)]

    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=config.workers) as executor:
        futures = [
            loop.run_in_executor(executor, trial_fn, config, trial)
            for trial in range(config.trials)
        ]
        return list(await asyncio.gather(*futures))
