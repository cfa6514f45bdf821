"""Public utilities for rs-coded-caching."""

from ._subsets import checked_comb, colex_rank, colex_subsets

__all__ = ["checked_comb", "colex_rank", "colex_subsets"]
