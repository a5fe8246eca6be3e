"""Outage record ingestion, validation and reliability statistics.

Loads historical outage events (county, start time, duration, customers
affected) together with per-county customer bases, validates them against
the dataset invariants, and computes the overall outage probability and
the conditional duration distribution.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

MIN_DURATION_MIN = 15  # dataset floor: shorter events are not captured


class OutageDataError(ValueError):
    """Raised when an outage or customer-base file violates the schema.

    ``bad_rows`` lists offending (row_number, reason) pairs; row numbers are
    1-based and count the header as row 1.
    """

    def __init__(self, message, bad_rows=None):
        super().__init__(message)
        self.bad_rows = list(bad_rows or [])


@dataclass(frozen=True)
class OutageRecord:
    county_id: str
    start: datetime
    duration_min: int
    customers_affected: int

    @property
    def end(self) -> datetime:
        return self.start + timedelta(minutes=self.duration_min)


@dataclass
class OutageDataset:
    """Validated outage events plus the customer base they refer to.

    ``horizon_start``/``horizon_end`` bound the observation window;
    ``horizon_minutes`` is its length (the normalizing constant of the
    overall outage probability).
    """

    records: list[OutageRecord]
    customer_base: dict[str, int]
    horizon_start: datetime
    horizon_end: datetime

    @property
    def horizon_minutes(self) -> int:
        return int((self.horizon_end - self.horizon_start).total_seconds() // 60)

    @property
    def total_customers(self) -> int:
        return sum(self.customer_base.values())

    def records_per_county(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.records:
            counts[r.county_id] = counts.get(r.county_id, 0) + 1
        return counts

    def validate(self) -> None:
        if not self.customer_base:
            raise OutageDataError("empty customer base")
        if self.horizon_minutes <= 0:
            raise OutageDataError("zero-length data horizon")
        max_dur = max((r.duration_min for r in self.records), default=0)
        if self.records and self.horizon_minutes <= max_dur:
            raise OutageDataError(
                f"horizon ({self.horizon_minutes} min) must exceed the longest "
                f"outage ({max_dur} min)"
            )
        bad = []
        for i, r in enumerate(self.records):
            if r.duration_min < MIN_DURATION_MIN:
                bad.append((i, f"duration {r.duration_min} < {MIN_DURATION_MIN} min"))
            if r.county_id not in self.customer_base:
                bad.append((i, f"unknown county {r.county_id!r}"))
            elif r.customers_affected > self.customer_base[r.county_id]:
                bad.append((i, "customers_affected exceeds county customer base"))
            if r.customers_affected < 0:
                bad.append((i, "negative customers_affected"))
            if r.start < self.horizon_start or r.start > self.horizon_end:
                bad.append((i, "start outside data horizon"))
        if bad:
            raise OutageDataError(
                f"{len(bad)} invalid record(s): "
                + "; ".join(f"record {i}: {why}" for i, why in bad[:10]),
                bad_rows=bad,
            )


def _infer_horizon(records: list[OutageRecord]) -> tuple[datetime, datetime]:
    """Calendar-year envelope: Jan 1 of the earliest year through Jan 1
    after the latest record end."""
    first = min(r.start for r in records)
    last = max(r.end for r in records)
    start = datetime(first.year, 1, 1)
    end = datetime(last.year + 1, 1, 1)
    return start, end


def load_outage_csv(path, customer_base_path, horizon_start=None,
                    horizon_end=None) -> OutageDataset:
    """Load and validate an outage CSV plus its customer-base CSV.

    Outage columns (exact order, header required):
    ``county_id,start_iso8601,duration_min,customers_affected``.
    Customer-base columns: ``county_id,total_customers``.

    Rows violating the schema raise :class:`OutageDataError` listing the
    offending row numbers.  Records that would cross the horizon end are
    truncated with a warning.  When the horizon is not given it is inferred
    as the calendar-year envelope of the records.
    """
    customer_base: dict[str, int] = {}
    bad: list[tuple[int, str]] = []
    with open(customer_base_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["county_id", "total_customers"]:
            raise OutageDataError(
                f"bad customer-base header in {customer_base_path}: {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                county, total = row[0].strip(), int(row[1])
            except (IndexError, ValueError):
                bad.append((lineno, f"malformed customer-base row {row!r}"))
                continue
            if total <= 0:
                bad.append((lineno, f"non-positive customer count for {county}"))
            customer_base[county] = total
    if bad:
        raise OutageDataError(
            f"invalid customer-base rows in {customer_base_path}", bad_rows=bad
        )

    records: list[OutageRecord] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["county_id", "start_iso8601", "duration_min", "customers_affected"]
        if header is None or [h.strip() for h in header] != expected:
            raise OutageDataError(f"bad outage header in {path}: {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                county = row[0].strip()
                start = datetime.fromisoformat(row[1].strip())
                duration = int(row[2])
                customers = int(row[3])
            except (IndexError, ValueError) as exc:
                bad.append((lineno, f"malformed row: {exc}"))
                continue
            if duration < MIN_DURATION_MIN:
                bad.append((lineno, f"duration_min {duration} below floor "
                                    f"{MIN_DURATION_MIN}"))
                continue
            if customers < 0:
                bad.append((lineno, "negative customers_affected"))
                continue
            if county not in customer_base:
                bad.append((lineno, f"unknown county {county!r}"))
                continue
            if customers > customer_base[county]:
                bad.append((lineno, "customers_affected exceeds county base"))
                continue
            records.append(OutageRecord(county, start, duration, customers))
    if bad:
        raise OutageDataError(
            f"{len(bad)} invalid row(s) in {path}: "
            + "; ".join(f"row {n}: {why}" for n, why in bad[:10]),
            bad_rows=bad,
        )
    if not records:
        raise OutageDataError(f"no outage records in {path}")

    if horizon_start is None or horizon_end is None:
        inf_start, inf_end = _infer_horizon(records)
        horizon_start = horizon_start or inf_start
        horizon_end = horizon_end or inf_end

    truncated = []
    fixed: list[OutageRecord] = []
    for r in records:
        if r.end > horizon_end:
            new_dur = int((horizon_end - r.start).total_seconds() // 60)
            truncated.append(r)
            if new_dur >= MIN_DURATION_MIN:
                fixed.append(OutageRecord(r.county_id, r.start, new_dur,
                                          r.customers_affected))
        else:
            fixed.append(r)
    if truncated:
        warnings.warn(
            f"truncated {len(truncated)} record(s) crossing the horizon end",
            stacklevel=2,
        )

    ds = OutageDataset(fixed, customer_base, horizon_start, horizon_end)
    ds.validate()
    return ds


def total_outage_probability(ds: OutageDataset) -> float:
    """Overall outage probability: customer-minutes lost over customer-minutes
    observed, sum_j sum_i C_ij * D_ij / (M * sum_j T_j)."""
    if not ds.customer_base:
        raise OutageDataError("empty customer base")
    m = ds.horizon_minutes
    if m <= 0:
        raise OutageDataError("zero horizon")
    total_customers = ds.total_customers
    if total_customers <= 0:
        raise OutageDataError("customer base sums to zero")
    lost = math.fsum(r.customers_affected * r.duration_min for r in ds.records)
    return lost / (m * total_customers)


@dataclass
class DurationDistribution:
    """Conditional outage-duration PMF over fixed-width minute bins.

    Bin ``i`` covers ``[lower_edges[i], lower_edges[i] + bin_minutes)``.
    ``cdf[i]`` is the probability of an outage lasting at most the end of
    bin ``i``.
    """

    bin_minutes: int
    lower_edges: np.ndarray
    counts: np.ndarray
    pmf: np.ndarray = field(init=False)
    cdf: np.ndarray = field(init=False)

    def __post_init__(self):
        total = self.counts.sum()
        self.pmf = self.counts / total
        self.cdf = np.cumsum(self.pmf)

    def mass_between(self, lo_min, hi_min) -> float:
        """Probability mass of bins entirely inside [lo_min, hi_min]."""
        sel = (self.lower_edges >= lo_min) & (self.lower_edges + self.bin_minutes <= hi_min + self.bin_minutes)
        return float(self.pmf[sel].sum())


def duration_distribution(ds: OutageDataset, bin_minutes: int = 15) -> DurationDistribution:
    """Histogram of outage durations conditional on an outage occurring."""
    if not ds.records:
        raise OutageDataError("empty dataset")
    if bin_minutes <= 0 or (bin_minutes % MIN_DURATION_MIN != 0
                            and MIN_DURATION_MIN % bin_minutes != 0):
        raise ValueError(
            f"bin_minutes must divide or be a multiple of {MIN_DURATION_MIN}"
        )
    durations = np.array([r.duration_min for r in ds.records])
    max_dur = int(durations.max())
    n_bins = max_dur // bin_minutes + 1
    edges = np.arange(n_bins + 1) * bin_minutes
    counts, _ = np.histogram(durations, bins=edges)
    return DurationDistribution(bin_minutes, edges[:-1], counts.astype(float))


def outage_features(record: OutageRecord) -> np.ndarray:
    """Raw clustering features of one event: (duration_min, start_month,
    start_hour).  Standardization happens in the scenario builder."""
    return np.array(
        [record.duration_min, record.start.month, record.start.hour],
        dtype=float,
    )
