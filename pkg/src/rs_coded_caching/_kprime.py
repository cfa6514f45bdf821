"""Pick the number of virtual users for a decentralized scheme."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING

from rs_coded_caching._ballsbins import STATIC_SLACK
from rs_coded_caching._rsgraph import construct_binomial, construct_mn
from rs_coded_caching.enums import Family
from rs_coded_caching.exceptions import (
    NoFeasibleConstructionError,
    ParameterOutOfRangeError,
)
from rs_coded_caching.utils import checked_comb
from rs_coded_caching.utils._subsets import MAX_GROUND_SET

if TYPE_CHECKING:
    from collections.abc import Iterator

    from rs_coded_caching._rsgraph import RsGraph

logger = logging.getLogger(__name__)

DEFAULT_MAX_SUBPACKETIZATION = 1 << 22
"""Largest F a realized instance may have."""


@dataclass(frozen=True, kw_only=True)
class KPrimeChoice:
    """The number of virtual users K' and the instance realizing it."""

    target_gain: float
    """g, the requested coding gain."""

    memory_ratio: float
    """M/N, the memory budget."""

    centralized_rate: float | None
    """R_c as requested; None when taken from the realized instance."""

    exponent: float
    """delta, zero for constant-rate families."""

    k_prime: int
    """The required number of virtual users."""

    family: Family | None = None
    """The family realizing K', if any."""

    construction_params: tuple[int, int] | None = None
    """(n, a) for the binomial family, (K, s) for the MN family."""

    realized_users: int | None = None
    """The number of virtual users of the realized instance, at least `k_prime`."""

    realized_rate: Fraction | None = None
    """Exact centralized rate t/F of the realized instance."""

    realized_memory_ratio: Fraction | None = None
    """Exact memory ratio of the realized instance, within the budget."""

    subpacketization: int | None = None
    """F of the realized instance, which the decentralized scheme inherits."""

    def __post_init__(self) -> None:
        if self.k_prime < 1:
            raise ParameterOutOfRangeError(f"K' must be positive, got {self.k_prime}")
        if self.realized_users is not None and self.realized_users < self.k_prime:
            raise ParameterOutOfRangeError(
                f"Realized {self.realized_users} virtual users, need {self.k_prime}",
            )

    @property
    def num_virtual_users(self) -> int:
        """The number of bins used by the pool: every realized slot participates."""
        return self.realized_users if self.realized_users is not None else self.k_prime

    @property
    def effective_rate(self) -> float:
        """R_c used in rate bounds: realized when available, else requested."""
        if self.realized_rate is not None:
            return float(self.realized_rate)
        if self.centralized_rate is None:
            raise ParameterOutOfRangeError("No centralized rate known")
        return self.centralized_rate

    @property
    def effective_memory_ratio(self) -> float:
        """M/N used in rate bounds: realized when available, else the budget."""
        if self.realized_memory_ratio is not None:
            return float(self.realized_memory_ratio)
        return self.memory_ratio

    def predicted_rate(self, num_users: int) -> float:
        """Return K(1 - M/N)/g + R_c(lnln K'/ln 2 + 9) for K real users."""
        k_prime = self.num_virtual_users
        if k_prime < 3:  # noqa: PLR2004
            raise ParameterOutOfRangeError(f"Rate bound needs K' >= 3, got {k_prime}")
        return num_users * (
            1 - self.effective_memory_ratio
        ) / self.target_gain + self.effective_rate * (
            math.log(math.log(k_prime)) / math.log(2) + STATIC_SLACK
        )

    def build_graph(self) -> RsGraph:
        """Construct the realized instance."""
        if self.construction_params is None:
            raise NoFeasibleConstructionError("No family instance was selected")
        first, second = self.construction_params
        match self.family:
            case Family.BINOMIAL:
                return construct_binomial(first, second)
            case Family.MN:
                return construct_mn(first, second)
        raise NoFeasibleConstructionError(f"Unknown family {self.family}")


def _ceil(value: Fraction | float) -> int:
    if isinstance(value, Fraction):
        return math.ceil(value)
    # Absorb floating error around exact integers, e.g. 32.000000000000004
    return math.ceil(round(value, 9))


def _required_users(
    *,
    gain: float,
    memory_ratio: Fraction | float,
    centralized_rate: Fraction | float | None,
    exponent: float,
) -> int:
    if exponent == 0:
        if centralized_rate is None:
            raise ParameterOutOfRangeError("Need R_c when delta is zero")
        if isinstance(memory_ratio, Fraction) and isinstance(
            centralized_rate,
            Fraction,
        ):
            return _ceil(Fraction(gain) * centralized_rate / (1 - memory_ratio))
        return _ceil(gain * float(centralized_rate) / (1 - float(memory_ratio)))
    return _ceil((gain / (1 - float(memory_ratio))) ** (1 / (1 - exponent)))


def _binomial_candidates(
    memory_ratio: float,
    max_subpacketization: int,
) -> Iterator[tuple[int, int, Fraction, Fraction]]:
    """Yield (n, a, memory ratio, rate) for a = 1, 2, ... within the budgets."""
    # Larger root of m*x^2 - 2x + 1 = 0, the ratio n/a at which the
    # asymptotic memory ratio (2x - 1)/x^2 equals the budget
    ratio = (1 + math.sqrt(1 - memory_ratio)) / memory_ratio
    a = 1
    while True:
        n = max(round(ratio * a), a + 2)
        while n <= MAX_GROUND_SET:
            cached = 1 - Fraction(checked_comb(n - 2, a), checked_comb(n, a))
            if cached <= memory_ratio:
                break
            n += 1
        else:
            return

        num_packets = checked_comb(n, a)
        if num_packets > max_subpacketization:
            return
        rate = Fraction(checked_comb(n, a + 2), num_packets)
        logger.debug("Binomial candidate n=%d a=%d F=%d", n, a, num_packets)
        yield n, a, cached, rate
        a += 1


def _mn_candidates(
    memory_ratio: float,
    max_subpacketization: int,
) -> Iterator[tuple[int, int, Fraction, Fraction]]:
    """Yield (K, s, memory ratio, rate) for K = 2, 3, ... within the budgets."""
    budget = Fraction(memory_ratio)
    for num_users in range(2, MAX_GROUND_SET + 1):
        s = math.floor(budget * num_users)
        if s < 1:
            continue
        s = min(s, num_users - 1)
        num_packets = checked_comb(num_users, s)
        if num_packets > max_subpacketization:
            return
        yield (
            num_users,
            s,
            Fraction(s, num_users),
            Fraction(num_users - s, s + 1),
        )


def select_kprime(  # noqa: PLR0913
    gain: float,
    memory_ratio: float,
    centralized_rate: float | None = None,
    exponent: float = 0.0,
    *,
    family: Family | None = None,
    max_subpacketization: int = DEFAULT_MAX_SUBPACKETIZATION,
) -> KPrimeChoice:
    """Choose K' so that K' two-choice bins give coding gain g.

    With delta = 0, K' = ceil(g R_c / (1 - M/N)); otherwise
    K' = ceil((g / (1 - M/N))^(1 / (1 - delta))).

    When `family` is given, the smallest instance of that family with at least K'
    users and memory ratio within the budget is selected. If `centralized_rate` is
    None, K' is computed from each candidate's own exact rate and memory ratio
    instead, so the chosen instance satisfies its own requirement.

    Args:
        gain: g >= 1.
        memory_ratio: M/N in (0, 1).
        centralized_rate: R_c > 0.
        exponent: delta in [0, 1).

    Keyword Args:
        family: Realize K' with this family.
        max_subpacketization: Give up on instances with more packets per file.

    Raises:
        ParameterOutOfRangeError: If a parameter is out of range.
        NoFeasibleConstructionError: If the family cannot reach K' within the
            memory and subpacketization budgets.

    """
    if gain < 1:
        raise ParameterOutOfRangeError(f"Need g >= 1, got {gain}")
    if not 0 < memory_ratio < 1:
        raise ParameterOutOfRangeError(f"Need 0 < M/N < 1, got {memory_ratio}")
    if centralized_rate is not None and centralized_rate <= 0:
        raise ParameterOutOfRangeError(f"Need R_c > 0, got {centralized_rate}")
    if not 0 <= exponent < 1:
        raise ParameterOutOfRangeError(f"Need 0 <= delta < 1, got {exponent}")

    self_consistent = centralized_rate is None
    if self_consistent and exponent == 0 and family is None:
        raise ParameterOutOfRangeError("Need R_c or a family to take it from")

    if family is None:
        return KPrimeChoice(
            target_gain=gain,
            memory_ratio=memory_ratio,
            centralized_rate=centralized_rate,
            exponent=exponent,
            k_prime=_required_users(
                gain=gain,
                memory_ratio=memory_ratio,
                centralized_rate=centralized_rate,
                exponent=exponent,
            ),
        )

    candidates = (
        _binomial_candidates(memory_ratio, max_subpacketization)
        if family == Family.BINOMIAL
        else _mn_candidates(memory_ratio, max_subpacketization)
    )
    for first, second, cached, rate in candidates:
        users = checked_comb(first, 2) if family == Family.BINOMIAL else first
        required = _required_users(
            gain=gain,
            memory_ratio=cached if self_consistent else memory_ratio,
            centralized_rate=rate if self_consistent else centralized_rate,
            exponent=exponent,
        )
        if users < required:
            continue

        logger.debug(
            "Selected %s(%d, %d): K'=%d of %d realized users",
            family.value,
            first,
            second,
            required,
            users,
        )
        return KPrimeChoice(
            target_gain=gain,
            memory_ratio=memory_ratio,
            centralized_rate=centralized_rate,
            exponent=exponent,
            k_prime=required,
            family=family,
            construction_params=(first, second),
            realized_users=users,
            realized_rate=rate,
            realized_memory_ratio=cached,
            subpacketization=checked_comb(first, second),
        )

    raise NoFeasibleConstructionError(
        f"No {family.value} instance reaches the required K' for g={gain}, "
        f"M/N={memory_ratio} with F <= {max_subpacketization}",
    )
