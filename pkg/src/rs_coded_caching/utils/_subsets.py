from __future__ import annotations

import itertools
import math
from typing import TYPE_CHECKING

import numpy as np

from rs_coded_caching.exceptions import ParameterOutOfRangeError

if TYPE_CHECKING:
    from collections.abc import Iterable

    from numpy.typing import NDArray

MAX_INDEX = int(np.iinfo(np.int64).max)
"""Largest count we allow as a vertex or matching index."""

MAX_GROUND_SET = 62
"""Largest ground set whose subsets fit in an int64 bitmask."""


def checked_comb(n: int, k: int) -> int:
    """Return the binomial coefficient C(n, k), exactly.

    Raises:
        ParameterOutOfRangeError: If the result does not fit a 64-bit index.

    """
    value = math.comb(n, k)
    if value > MAX_INDEX:
        raise ParameterOutOfRangeError(
            f"C({n}, {k}) = {value} overflows a 64-bit index",
        )
    return value


def colex_subsets(n: int, k: int) -> NDArray[np.int64]:
    """Enumerate the k-subsets of {0..n-1} in colexicographic order.

    Returns:
        An array of shape (C(n, k), k). Each row holds the elements of one subset
            in increasing order.

    """
    if not 0 <= k <= n <= MAX_GROUND_SET:
        raise ParameterOutOfRangeError(
            f"Cannot enumerate {k}-subsets of a ground set of size {n}",
        )
    count = checked_comb(n, k)
    flat = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(n), k)),
        dtype=np.int64,
        count=count * k,
    )
    subsets = flat.reshape(count, k)
    # Colex order is numeric order of the subset bitmasks
    order = np.argsort(subset_masks(subsets), kind="stable")
    return subsets[order]


def subset_masks(subsets: NDArray[np.int64]) -> NDArray[np.int64]:
    """Return the int64 bitmask of each row of a (count, k) subset array."""
    if subsets.shape[1] == 0:
        return np.zeros(subsets.shape[0], dtype=np.int64)
    return np.bitwise_or.reduce(np.left_shift(np.int64(1), subsets), axis=1)


def colex_rank(subset: Iterable[int]) -> int:
    """Return the colex rank of a subset of {0..n-1}."""
    return sum(math.comb(c, j + 1) for j, c in enumerate(sorted(subset)))
