"""Validated experiment configurations, one per CLI subcommand."""

from __future__ import annotations

from pathlib import Path
from typing import Literal
import sys

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from rs_coded_caching._kprime import DEFAULT_MAX_SUBPACKETIZATION
from rs_coded_caching._library import DEFAULT_PACKET_BYTES
from rs_coded_caching._replay import DEFAULT_AUDIT_INTERVAL
from rs_coded_caching.enums import AdversaryKind, DemandKind, Family, OutputFormat

DEFAULT_NUM_FILES = 8
DEFAULT_CHURN_SLACK = 20.0


class ExperimentConfig(BaseModel):
    """Settings shared by every subcommand."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = Field(default=0, ge=0)
    """Master seed; trial seeds are derived from it."""

    trials: int = Field(default=1, ge=1)
    """Number of independent trials."""

    out: Path | None = None
    """Report path. Without it only a summary is printed."""

    format: OutputFormat = OutputFormat.CSV
    """Report file format."""

    workers: int = Field(default=1, ge=1)
    """Worker processes for trials; 1 runs trials inline."""

    record_timing: bool = False
    """Write wall times into the report, which makes it vary between runs."""


class FamilyParams(BaseModel):
    """Parameters selecting one instance of a constructed family."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: Family | None = None
    n: int | None = Field(default=None, ge=1)
    a: int | None = Field(default=None, ge=1)
    k: int | None = Field(default=None, ge=1)
    s: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_family_params(self) -> Self:
        match self.family:
            case Family.BINOMIAL:
                if self.n is None or self.a is None:
                    raise ValueError("The binomial family needs --n and --a")
                if self.a + 2 > self.n:
                    raise ValueError(f"Need a + 2 <= n, got n={self.n}, a={self.a}")
            case Family.MN:
                if self.k is None or self.s is None:
                    raise ValueError("The mn family needs --k and --s")
                if self.s >= self.k:
                    raise ValueError(f"Need s < K, got K={self.k}, s={self.s}")
        return self

    def params(self) -> tuple[int, int]:
        """(n, a) or (K, s)."""
        if self.family == Family.BINOMIAL and self.n and self.a:
            return self.n, self.a
        if self.family == Family.MN and self.k and self.s:
            return self.k, self.s
        raise ValueError("No family instance configured")


class ConstructConfig(ExperimentConfig, FamilyParams):
    """Build a graph of a family and write it as JSON."""

    family: Family


class ValidateConfig(ExperimentConfig):
    """Check a graph file for the Ruzsa-Szemerédi properties."""

    graph: Path


class CentralizedConfig(ExperimentConfig, FamilyParams):
    """Run placement, delivery and decoding of a centralized scheme."""

    graph: Path | None = None
    """Graph file to use instead of a family instance."""

    num_files: int = Field(default=DEFAULT_NUM_FILES, ge=1)
    packet_bytes: int = Field(default=DEFAULT_PACKET_BYTES, ge=1)
    demand: DemandKind = DemandKind.DISTINCT
    blind: bool = False
    """Decode from matching indices and payloads plus the public graph."""

    dump_transmissions: Path | None = None
    """Write the first trial's transmissions here."""

    @model_validator(mode="after")
    def _check_source(self) -> Self:
        if (self.graph is None) == (self.family is None):
            raise ValueError("Give exactly one of a graph file or a family")
        return self


class DecentralizedConfig(ExperimentConfig):
    """Place K real users on K' virtual users and deliver in rounds."""

    num_users: int = Field(ge=0)
    """K, the number of real users."""

    gain: float = Field(ge=1)
    """g, the target coding gain."""

    memory_ratio: float = Field(gt=0, lt=1)
    centralized_rate: float | None = Field(default=None, gt=0)
    """R_c for K' selection; taken from the realized instance when omitted."""

    exponent: float = Field(default=0.0, ge=0, lt=1)
    family: Family = Family.BINOMIAL
    max_subpacketization: int = Field(default=DEFAULT_MAX_SUBPACKETIZATION, ge=1)
    num_files: int = Field(default=DEFAULT_NUM_FILES, ge=1)
    packet_bytes: int = Field(default=DEFAULT_PACKET_BYTES, ge=1)
    demand: DemandKind = DemandKind.UNIFORM
    choices: int = Field(default=2, ge=1)
    prune: bool = False
    """Send only matchings that touch an occupied virtual user."""

    decode_limit: int | None = Field(default=None, ge=1)
    """Decode at most this many real users per round."""


class BallsBinsConfig(ExperimentConfig):
    """Run the static or churn two-choice process."""

    mode: Literal["static", "churn"] = "static"
    num_balls: int = Field(ge=0)
    """K, the number of balls (the population cap under churn)."""

    num_bins: int = Field(ge=1)
    """K', the number of bins."""

    churn_steps: int = Field(default=0, ge=0)
    """T, the number of delete-then-insert steps."""

    adversary: AdversaryKind = AdversaryKind.FIFO
    adversary_seed: int | None = Field(default=None, ge=0)
    """Seed of the random adversary; derived from the trial seed when omitted."""

    deletions: tuple[int, ...] | None = None
    """The vector v for the explicit adversary."""

    choices: int = Field(default=2, ge=1)
    slack: float = DEFAULT_CHURN_SLACK
    """Additive constant of the churn bound."""

    check_heights: bool = False
    """Check mu_{>=k} >= nu_{>=k} after every insertion."""

    series: Path | None = None
    """Write the first trial's max-load series here as CSV."""

    histogram: Path | None = None
    """Write the first trial's height histogram here as JSON."""

    event_log: Path | None = None
    """Write the first trial's pool event log here (churn mode)."""

    @model_validator(mode="after")
    def _check_adversary(self) -> Self:
        if self.adversary == AdversaryKind.EXPLICIT and self.deletions is None:
            raise ValueError("The explicit adversary needs --deletions")
        return self


class ChurnReplayConfig(ExperimentConfig):
    """Replay and audit a pool event log."""

    event_log: Path
    graph: Path | None = None
    """Replay into a pool with the cache contents of this graph."""

    audit_interval: int = Field(default=DEFAULT_AUDIT_INTERVAL, ge=1)


class SubpacketizationConfig(ExperimentConfig):
    """Tabulate realized instances across coding gains."""

    gains: tuple[float, ...] = (5.0, 10.0, 20.0, 40.0)
    memory_ratio: float = Field(default=0.5, gt=0, lt=1)
    centralized_rate: float | None = Field(default=None, gt=0)
    exponent: float = Field(default=0.0, ge=0, lt=1)
    family: Family = Family.BINOMIAL
    max_subpacketization: int = Field(default=DEFAULT_MAX_SUBPACKETIZATION, ge=1)
