"""File libraries and user demand vectors."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING
import sys

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

import numpy as np

from rs_coded_caching.enums import DemandKind
from rs_coded_caching.exceptions import DimensionMismatchError, ParameterOutOfRangeError

if TYPE_CHECKING:
    from collections.abc import Iterable

    from numpy.typing import NDArray

DEFAULT_PACKET_BYTES = 64
"""Default packet size B in bytes."""

DUMMY_FILE = -1
"""Demand value of a virtual user with no real user behind it.

The dummy file is all zeros and known to every user, so its packets are the
identity for XOR.
"""


@dataclass(frozen=True, kw_only=True, eq=False)
class Library:
    """N files, each split into F packets of B bytes."""

    content: NDArray[np.uint8]
    """The packet bytes, with shape (N, F, B)."""

    seed: int | None = None
    """The generator seed used to fill `content`, if generated."""

    _padded: NDArray[np.uint8] | None = None
    """Cached copy of `content` with the all-zero dummy file appended."""

    def __post_init__(self) -> None:
        if self.content.ndim != 3:  # noqa: PLR2004
            raise DimensionMismatchError(
                f"Library content must have shape (N, F, B), got {self.content.shape}",
            )
        if self.content.dtype != np.uint8:
            raise DimensionMismatchError(
                f"Library content must be uint8, got {self.content.dtype}",
            )

    @classmethod
    def generate(
        cls,
        *,
        num_files: int,
        num_packets: int,
        packet_bytes: int = DEFAULT_PACKET_BYTES,
        seed: int,
    ) -> Self:
        """Fill a library with reproducible pseudo-random bytes.

        Keyword Args:
            num_files: N.
            num_packets: F.
            packet_bytes: B.
            seed: Seed for `numpy.random.default_rng`.

        """
        if num_files < 1 or num_packets < 0 or packet_bytes < 1:
            raise ParameterOutOfRangeError(
                f"Need N >= 1, F >= 0, B >= 1, got N={num_files}, F={num_packets}, "
                f"B={packet_bytes}",
            )
        rng = np.random.default_rng(seed)
        content = rng.integers(
            0,
            256,
            size=(num_files, num_packets, packet_bytes),
            dtype=np.uint8,
        )
        return cls(content=content, seed=seed)

    @property
    def num_files(self) -> int:
        """N."""
        return self.content.shape[0]

    @property
    def num_packets(self) -> int:
        """F."""
        return self.content.shape[1]

    @property
    def packet_bytes(self) -> int:
        """B."""
        return self.content.shape[2]

    def file(self, index: int) -> NDArray[np.uint8]:
        """Return one file as an (F, B) array. The dummy file is all zeros."""
        return self.padded()[index]

    def padded(self) -> NDArray[np.uint8]:
        """Return the content with the dummy file appended as the last file.

        Indexing the result with `DUMMY_FILE` (-1) selects the dummy file.
        """
        if self._padded is not None:
            return self._padded

        padded = np.concatenate(
            [self.content, np.zeros((1, *self.content.shape[1:]), dtype=np.uint8)],
        )
        padded.flags.writeable = False
        # We use object.__setattr__ because the dataclass is frozen
        object.__setattr__(self, "_padded", padded)
        return padded


@dataclass(frozen=True, slots=True)
class DemandVector:
    """The file demanded by each user."""

    demands: tuple[int, ...]
    """File index (0-based) demanded by each user, or `DUMMY_FILE`."""

    def __post_init__(self) -> None:
        if any(d < DUMMY_FILE for d in self.demands):
            raise ParameterOutOfRangeError(f"Invalid file index in {self.demands}")

    def __len__(self) -> int:
        return len(self.demands)

    def __getitem__(self, user: int) -> int:
        return self.demands[user]

    def as_array(self) -> NDArray[np.int64]:
        """The demands as an int64 array."""
        return np.asarray(self.demands, dtype=np.int64)

    def check(
        self,
        *,
        num_users: int,
        num_files: int,
        allow_dummy: bool = True,
    ) -> None:
        """Check the vector against a user count and library size.

        Keyword Args:
            allow_dummy: Accept `DUMMY_FILE` entries.

        Raises:
            DimensionMismatchError: On a length or file index mismatch, or on a
                dummy demand when `allow_dummy` is False.

        """
        if not allow_dummy and DUMMY_FILE in self.demands:
            raise DimensionMismatchError(
                f"Only real files can be demanded here, got {self.demands}",
            )
        if len(self.demands) != num_users:
            raise DimensionMismatchError(
                f"Expected {num_users} demands, got {len(self.demands)}",
            )
        if any(d >= num_files for d in self.demands):
            raise DimensionMismatchError(
                f"Demand outside library of {num_files} files: {self.demands}",
            )

    @classmethod
    def of(cls, demands: Iterable[int]) -> DemandVector:
        """Create a demand vector from any iterable of file indices."""
        return cls(tuple(int(d) for d in demands))


def make_demands(
    kind: DemandKind,
    *,
    num_users: int,
    num_files: int,
    rng: np.random.Generator | None = None,
    file: int = 0,
) -> DemandVector:
    """Generate a demand vector.

    Args:
        kind: `DISTINCT` gives user u the file u mod N, `UNIFORM` draws every demand
            uniformly, `CONSTANT` has every user demand `file`.

    Keyword Args:
        num_users: K.
        num_files: N.
        rng: Generator for `UNIFORM` demands.
        file: The file demanded by everyone for `CONSTANT` demands.

    """
    match kind:
        case DemandKind.DISTINCT:
            if num_users > num_files:
                warnings.warn(
                    f"Distinct demands need K <= N, got K={num_users}, N={num_files}; "
                    "demands wrap around",
                    UserWarning,
                    stacklevel=2,
                )
            return DemandVector(tuple(u % num_files for u in range(num_users)))
        case DemandKind.UNIFORM:
            if rng is None:
                raise ValueError("Uniform demands need a random generator")
            return DemandVector.of(rng.integers(num_files, size=num_users).tolist())
        case DemandKind.CONSTANT:
            return DemandVector((file,) * num_users)

    raise NotImplementedError(kind)
