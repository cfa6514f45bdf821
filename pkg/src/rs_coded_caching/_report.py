"""Trial records, experiment reports and their CSV/JSON files."""

from __future__ import annotations

import csv
import io
import json
import statistics
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from rs_coded_caching.enums import OutputFormat

if TYPE_CHECKING:
    from collections.abc import Sequence
    from os import PathLike

    from rs_coded_caching._ballsbins import DynamicResult, HeightHistogram

SCHEMA_VERSION = 1
"""Version written into the comment line of every CSV file."""

SCHEMA_PREFIX = "rs-coded-caching"


def schema_line(kind: str) -> str:
    """The leading comment line of a CSV file of the given kind."""
    return f"# schema: {SCHEMA_PREFIX}/{kind} v{SCHEMA_VERSION}"


class TrialRecord(BaseModel):
    """Measurements of one trial. Fields a subcommand does not measure stay None."""

    model_config = ConfigDict(frozen=True)

    trial: int
    seed: int
    max_load: int | None = None
    naive_rate: float | None = None
    naive_rate_exact: str | None = None
    """The rate as an exact fraction."""

    pruned_rate: float | None = None
    decode_ok: bool = True
    counts_ok: bool | None = None
    """Whether naive transmissions equal t times the max load."""

    height_violations: int | None = None
    bits_overhead: int | None = None
    round_count: int | None = None
    bound: float | None = None
    within_bound: bool | None = None
    wall_time: float | None = None

    @property
    def passed(self) -> bool:
        """True unless decoding or an exact property failed."""
        return (
            self.decode_ok
            and self.counts_ok is not False
            and not self.height_violations
        )


class Aggregate(BaseModel):
    """Summary statistics over trials."""

    model_config = ConfigDict(frozen=True)

    trials: int
    mean_max_load: float | None = None
    max_max_load: int | None = None
    mean_naive_rate: float | None = None
    max_naive_rate: float | None = None
    bound: float | None = None
    fraction_within_bound: float | None = Field(default=None, ge=0, le=1)
    wall_time: float | None = None


class ExperimentReport(BaseModel):
    """Per-trial records plus aggregates for one subcommand run."""

    model_config = ConfigDict(frozen=True)

    kind: str
    """The experiment kind, also used in the CSV schema line."""

    config: dict[str, Any]
    records: list[TrialRecord]
    aggregate: Aggregate
    status: Literal["pass", "fail"]

    @classmethod
    def from_records(
        cls,
        *,
        kind: str,
        config: dict[str, Any],
        records: Sequence[TrialRecord],
        wall_time: float | None = None,
    ) -> ExperimentReport:
        """Aggregate trial records. Status is "pass" when every record passed."""
        loads = [r.max_load for r in records if r.max_load is not None]
        rates = [r.naive_rate for r in records if r.naive_rate is not None]
        bounds = [r.bound for r in records if r.bound is not None]
        within = [r.within_bound for r in records if r.within_bound is not None]

        aggregate = Aggregate(
            trials=len(records),
            mean_max_load=statistics.fmean(loads) if loads else None,
            max_max_load=max(loads) if loads else None,
            mean_naive_rate=statistics.fmean(rates) if rates else None,
            max_naive_rate=max(rates) if rates else None,
            bound=max(bounds) if bounds else None,
            fraction_within_bound=sum(within) / len(within) if within else None,
            wall_time=wall_time,
        )
        return cls(
            kind=kind,
            config=config,
            records=list(records),
            aggregate=aggregate,
            status="pass" if all(r.passed for r in records) else "fail",
        )

    def to_csv(self) -> str:
        """One row per trial after the schema line, then nothing else."""
        fields = list(TrialRecord.model_fields)
        buffer = io.StringIO()
        buffer.write(schema_line(self.kind) + "\n")
        writer = csv.DictWriter(buffer, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for record in self.records:
            writer.writerow(
                {
                    key: "" if value is None else value
                    for key, value in record.model_dump().items()
                },
            )
        return buffer.getvalue()

    def to_json(self) -> str:
        """The whole report as indented JSON."""
        return self.model_dump_json(indent=2) + "\n"

    def write(self, path: str | PathLike[str], fmt: OutputFormat) -> None:
        """Write the report in the given format."""
        text = self.to_csv() if fmt == OutputFormat.CSV else self.to_json()
        Path(path).write_text(text)


def write_series(path: str | PathLike[str], result: DynamicResult) -> None:
    """Write the max load and population after every step as CSV."""
    with Path(path).open("w", newline="") as f:
        f.write(schema_line("churn-series") + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["step", "max_load", "population"])
        writer.writerows(
            zip(
                range(1, len(result.max_load) + 1),
                result.max_load.tolist(),
                result.population.tolist(),
                strict=True,
            ),
        )


def write_histogram(path: str | PathLike[str], histogram: HeightHistogram) -> None:
    """Write mu_{>=k} and nu_{>=k} as JSON."""
    Path(path).write_text(json.dumps(histogram.as_dict()) + "\n")
