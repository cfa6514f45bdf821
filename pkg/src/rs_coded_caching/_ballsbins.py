"""Balls-and-bins processes with d random choices, static and under churn."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from rs_coded_caching.enums import AdversaryKind
from rs_coded_caching.exceptions import InvalidScriptError, ParameterOutOfRangeError

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

DEFAULT_CHOICES = 2
"""The number of bins sampled per insertion."""

STATIC_SLACK = 9.0
"""Additive constant of the static two-choice max-load bound."""


def draw_choices(
    rng: np.random.Generator,
    num_bins: int,
    count: int,
    *,
    choices: int = DEFAULT_CHOICES,
) -> NDArray[np.int64]:
    """Draw the candidate bins for `count` insertions from one committed stream.

    Row i holds the choices of the i-th insertion, first choice first. Every process
    in this package draws through this function with one call per run, which makes
    runs with equal seeds comparable across modules.

    Returns:
        An int64 array of shape (count, choices), uniform over [0, num_bins).

    """
    if num_bins < 1:
        raise ParameterOutOfRangeError(f"Need at least one bin, got {num_bins}")
    if choices < 1:
        raise ParameterOutOfRangeError(f"Need at least one choice, got {choices}")
    return rng.integers(num_bins, size=(count, choices), dtype=np.int64)


def least_loaded(loads: Sequence[int], candidates: Sequence[int]) -> int:
    """Return the least loaded candidate, the earliest one on ties."""
    return min(candidates, key=loads.__getitem__)


@dataclass(frozen=True, kw_only=True, eq=False)
class BinsState:
    """Final state of a balls-and-bins run.

    Balls are identified by their 1-based insertion time; per-ball arrays are
    indexed by insertion time minus one.
    """

    num_bins: int
    """K', the number of bins."""

    loads: NDArray[np.int64]
    """Current number of balls in each bin."""

    ball_bins: NDArray[np.int64]
    """The bin of every ball ever inserted."""

    heights: NDArray[np.int64]
    """The height of every ball ever inserted, fixed at insertion."""

    alive: NDArray[np.bool_]
    """Whether each ball is still present."""

    time: int
    """The number of steps executed."""

    max_load_seen: int
    """The largest bin load at any point of the run."""

    @property
    def population(self) -> int:
        """The number of balls present."""
        return int(self.loads.sum())

    @property
    def max_load(self) -> int:
        """The current maximum bin load."""
        return int(self.loads.max()) if self.num_bins else 0

    def surviving_heights(self) -> NDArray[np.int64]:
        """Heights of the balls still present."""
        return self.heights[self.alive]


@dataclass(frozen=True, kw_only=True)
class ChurnScript:
    """An oblivious adversary's insert/delete schedule.

    The first `population_cap` steps insert one ball each. At each later step
    K + j, the ball inserted at time `deletions[j - 1]` is removed and then a new
    ball is inserted.
    """

    population_cap: int
    """K, the number of balls present after the initial insertions."""

    deletions: tuple[int, ...] = ()
    """The vector v: insertion time of the ball deleted at each churn step."""

    def __post_init__(self) -> None:
        if self.population_cap < 0:
            raise InvalidScriptError(
                f"Population cap must be non-negative, got {self.population_cap}",
            )
        if len(set(self.deletions)) != len(self.deletions):
            raise InvalidScriptError("Deletion times must be unique")
        for j, v in enumerate(self.deletions, start=1):
            if not 1 <= v <= self.population_cap + j - 1:
                raise InvalidScriptError(
                    f"Deletion {j} targets time {v}, "
                    f"outside [1, {self.population_cap + j - 1}]",
                )

    @property
    def num_churn_steps(self) -> int:
        """T, the number of delete-then-insert steps."""
        return len(self.deletions)

    @property
    def num_insertions(self) -> int:
        """The total number of balls ever inserted."""
        return self.population_cap + len(self.deletions)


def make_adversary(
    kind: AdversaryKind,
    population_cap: int,
    num_churn_steps: int,
    *,
    seed: int | None = None,
    deletions: Sequence[int] | None = None,
) -> ChurnScript:
    """Fix a deletion schedule before any random choice of the process.

    Args:
        kind: `FIFO` deletes the oldest surviving ball, `LIFO` the newest,
            `RANDOM_FIXED` a uniform surviving ball from a stream seeded with
            `seed`, and `EXPLICIT` uses `deletions` as given.
        population_cap: K.
        num_churn_steps: T.

    Keyword Args:
        seed: Seed of the pre-committed stream for `RANDOM_FIXED`.
        deletions: The vector v for `EXPLICIT`.

    Raises:
        InvalidScriptError: If T < 0 or the explicit vector is invalid.

    """
    if num_churn_steps < 0:
        raise InvalidScriptError(f"Need T >= 0, got {num_churn_steps}")
    k, steps = population_cap, num_churn_steps

    match kind:
        case AdversaryKind.FIFO:
            # The oldest survivor at step j is always the ball inserted at time j
            v = tuple(range(1, steps + 1))
        case AdversaryKind.LIFO:
            # The newest survivor is the ball inserted on the previous step
            v = tuple(range(k, k + steps))
        case AdversaryKind.RANDOM_FIXED:
            if k == 0 and steps:
                raise InvalidScriptError("Cannot delete from an empty population")
            picks = np.random.default_rng(seed).integers(max(k, 1), size=steps)
            survivors = list(range(1, k + 1))
            chosen: list[int] = []
            for j, pick in enumerate(picks.tolist(), start=1):
                chosen.append(survivors[pick])
                survivors[pick] = k + j
            v = tuple(chosen)
        case AdversaryKind.EXPLICIT:
            if deletions is None:
                raise InvalidScriptError("Explicit adversary needs a deletion vector")
            v = tuple(int(x) for x in deletions)
        case _:
            raise NotImplementedError(kind)

    return ChurnScript(population_cap=k, deletions=v)


class _Process:
    """Mutable bookkeeping shared by the static and dynamic runs."""

    def __init__(
        self,
        *,
        num_bins: int,
        draws: NDArray[np.int64],
        check_heights: bool,
    ) -> None:
        capacity = len(draws)
        self.num_bins = num_bins
        self.draws = draws.tolist()
        self.loads = [0] * num_bins
        self.ball_bins = [-1] * capacity
        self.heights = [0] * capacity
        self.alive = [False] * capacity
        self.inserted = 0
        self.time = 0
        self.load_count = [num_bins]
        self.current_max = 0
        self.max_seen = 0
        self.population = 0

        # excess[k] = mu_{>=k} - nu_{>=k}, maintained incrementally
        self.excess: NDArray[np.int64] | None = (
            np.zeros(capacity + 2, dtype=np.int64) if check_heights else None
        )
        self.top_height = 0
        self.height_violations = 0

    def insert(self) -> None:
        row = self.draws[self.inserted]
        chosen = least_loaded(self.loads, row)
        old = self.loads[chosen]
        new = old + 1
        self.loads[chosen] = new
        self.load_count[old] -= 1
        if new == len(self.load_count):
            self.load_count.append(0)
        self.load_count[new] += 1
        self.current_max = max(self.current_max, new)
        self.max_seen = max(self.max_seen, new)

        ball = self.inserted
        self.ball_bins[ball] = chosen
        self.heights[ball] = new
        self.alive[ball] = True
        self.inserted += 1
        self.population += 1

        if self.excess is not None:
            # mu gains at every k <= new, nu gains at k == new
            self.excess[1:new] += 1
            self.top_height = max(self.top_height, new)
            if self.excess[1 : self.top_height + 1].min() < 0:
                self.height_violations += 1

    def delete(self, time: int) -> None:
        ball = time - 1
        if not 0 <= ball < self.inserted or not self.alive[ball]:
            raise InvalidScriptError(f"Ball inserted at time {time} is not present")
        chosen = self.ball_bins[ball]
        old = self.loads[chosen]
        self.loads[chosen] = old - 1
        self.load_count[old] -= 1
        self.load_count[old - 1] += 1
        if old == self.current_max and self.load_count[old] == 0:
            self.current_max -= 1
        self.alive[ball] = False
        self.population -= 1

        if self.excess is not None:
            self.excess[1 : self.heights[ball] + 1] -= 1
            self.excess[old] += 1

    def state(self) -> BinsState:
        return BinsState(
            num_bins=self.num_bins,
            loads=np.asarray(self.loads, dtype=np.int64),
            ball_bins=np.asarray(self.ball_bins, dtype=np.int64),
            heights=np.asarray(self.heights, dtype=np.int64),
            alive=np.asarray(self.alive, dtype=np.bool_),
            time=self.time,
            max_load_seen=self.max_seen,
        )


def run_static(
    num_balls: int,
    num_bins: int,
    rng: np.random.Generator,
    *,
    choices: int = DEFAULT_CHOICES,
) -> BinsState:
    """Place balls one by one into the least loaded of `choices` uniform bins.

    Ties go to the earliest draw.
    """
    if num_balls < 0:
        raise ParameterOutOfRangeError(f"Need K >= 0 balls, got {num_balls}")
    draws = draw_choices(rng, num_bins, num_balls, choices=choices)
    process = _Process(num_bins=num_bins, draws=draws, check_heights=False)
    for _ in range(num_balls):
        process.insert()
        process.time += 1
    return process.state()


@dataclass(frozen=True, kw_only=True, eq=False)
class DynamicResult:
    """Outcome of a run of the insert/delete process."""

    state: BinsState
    """The final state."""

    max_load: NDArray[np.int64]
    """Maximum bin load after every step."""

    population: NDArray[np.int64]
    """Number of balls present after every step."""

    height_violations: int | None
    """Post-insertion instants where mu_{>=k} < nu_{>=k} for some k.

    None unless the run was instrumented.
    """

    @property
    def running_max_load(self) -> NDArray[np.int64]:
        """The largest load seen up to each step."""
        return np.maximum.accumulate(self.max_load)


def run_dynamic(
    script: ChurnScript,
    num_bins: int,
    rng: np.random.Generator,
    *,
    choices: int = DEFAULT_CHOICES,
    check_heights: bool = False,
) -> DynamicResult:
    """Run the insert/delete process driven by an oblivious adversary.

    The first K steps insert; every later step deletes the scripted ball and then
    inserts a new one. Insertions draw their choices from the same committed
    stream as `run_static`, so a script without churn steps reproduces it exactly.

    Keyword Args:
        choices: Bins sampled per insertion.
        check_heights: Track whether mu_{>=k} >= nu_{>=k} holds at every
            post-insertion instant.

    """
    draws = draw_choices(rng, num_bins, script.num_insertions, choices=choices)
    process = _Process(num_bins=num_bins, draws=draws, check_heights=check_heights)
    steps = script.num_insertions
    max_load = np.empty(steps, dtype=np.int64)
    population = np.empty(steps, dtype=np.int64)

    for step in range(steps):
        if step >= script.population_cap:
            process.delete(script.deletions[step - script.population_cap])
        process.insert()
        process.time += 1
        max_load[step] = process.current_max
        population[step] = process.population

    logger.debug(
        "Dynamic run: K=%d K'=%d T=%d max load seen %d",
        script.population_cap,
        num_bins,
        script.num_churn_steps,
        process.max_seen,
    )
    return DynamicResult(
        state=process.state(),
        max_load=max_load,
        population=population,
        height_violations=process.height_violations if check_heights else None,
    )


def _lnln_term(num_bins: int) -> float:
    return math.log(math.log(num_bins)) / math.log(2)


def bound_static(num_balls: int, num_bins: int) -> float:
    """Return K/K' + lnln K'/ln 2 + 9, the two-choice max-load bound.

    Raises:
        ParameterOutOfRangeError: If K' < 3, where lnln K' is not positive.

    """
    if num_bins < 3:  # noqa: PLR2004
        raise ParameterOutOfRangeError(f"Bound needs K' >= 3, got {num_bins}")
    return num_balls / num_bins + _lnln_term(num_bins) + STATIC_SLACK


def bound_dynamic(num_balls: int, num_bins: int, *, slack: float = 20.0) -> float:
    """Return K/K' + lnln K'/ln 2 + slack, the max-load bound under churn.

    The population cap K stands in for the number of balls present, and `slack`
    for the unspecified additive constant.
    """
    if num_bins < 3:  # noqa: PLR2004
        raise ParameterOutOfRangeError(f"Bound needs K' >= 3, got {num_bins}")
    return num_balls / num_bins + _lnln_term(num_bins) + slack


@dataclass(frozen=True, kw_only=True)
class HeightHistogram:
    """Counts of surviving balls by height and of bins by load."""

    mu: tuple[int, ...]
    """mu[k] is the number of balls with height at least k."""

    nu: tuple[int, ...]
    """nu[k] is the number of bins with load at least k."""

    def mu_at_least(self, k: int) -> int:
        """The number of balls with height at least k."""
        return self.mu[k] if k < len(self.mu) else 0

    def nu_at_least(self, k: int) -> int:
        """The number of bins with load at least k."""
        return self.nu[k] if k < len(self.nu) else 0

    def as_dict(self) -> dict[str, list[int]]:
        """JSON-ready representation."""
        return {"mu": list(self.mu), "nu": list(self.nu)}


def height_histogram(state: BinsState) -> HeightHistogram:
    """Compute mu_{>=k} and nu_{>=k} for every k from a state."""
    heights = state.surviving_heights()
    top = max(
        int(heights.max()) if heights.size else 0,
        int(state.loads.max()) if state.loads.size else 0,
    )
    # Suffix sums of the exact-count histograms
    ball_counts = np.bincount(heights, minlength=top + 1)
    bin_counts = np.bincount(state.loads, minlength=top + 1)
    mu = np.cumsum(ball_counts[::-1])[::-1]
    nu = np.cumsum(bin_counts[::-1])[::-1]
    return HeightHistogram(mu=tuple(mu.tolist()), nu=tuple(nu.tolist()))
