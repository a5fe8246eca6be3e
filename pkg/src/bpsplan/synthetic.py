"""Synthetic datasets with the same schema as the production inputs.

The real outage feed and facility meter data cannot be redistributed, so
these generators produce statistically similar stand-ins: a four-year
state-wide outage history calibrated to an overall outage probability of
about 0.063% with a five-day worst event, a one-year 15-minute demand
profile for a round-the-clock medical facility, and a one-year solar
capacity-factor trace.

Every generator is deterministic for a fixed seed.
"""
from __future__ import annotations

import csv
import math
from datetime import datetime, timedelta

import numpy as np

from .outages import OutageDataset, OutageRecord

PROFILE_YEAR = 2021  # non-leap, used by demand and PV traces
STEP_MIN = 15
STEPS_PER_DAY = 24 * 60 // STEP_MIN
STEPS_PER_YEAR = 365 * STEPS_PER_DAY

# County layout loosely shaped like a New England state: name -> customers.
_COUNTIES = {
    "C01": 520_000, "C02": 410_000, "C03": 330_000, "C04": 290_000,
    "C05": 250_000, "C06": 210_000, "C07": 180_000, "C08": 150_000,
    "C09": 120_000, "C10": 100_000, "C11": 85_000, "C12": 70_000,
    "C13": 55_000, "C14": 40_000,
}

_MONTH_WEIGHTS = np.array(
    [1.40, 1.20, 1.10, 0.85, 0.80, 1.00, 1.20, 1.30, 0.85, 0.90, 1.10, 1.45]
)
_HOUR_WEIGHTS = np.array(
    [0.5, 0.4, 0.4, 0.4, 0.5, 0.6, 0.8, 1.0, 1.1, 1.1, 1.0, 1.0,
     1.1, 1.2, 1.4, 1.6, 1.8, 1.9, 1.8, 1.6, 1.3, 1.0, 0.8, 0.6]
)

_DAYS_IN_MONTH = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31]


def _sample_starts(rng, n, years):
    months = rng.choice(12, size=n, p=_MONTH_WEIGHTS / _MONTH_WEIGHTS.sum())
    hours = rng.choice(24, size=n, p=_HOUR_WEIGHTS / _HOUR_WEIGHTS.sum())
    year = rng.choice(years, size=n)
    day = rng.integers(1, 29, size=n)  # stay clear of month-length edge cases
    minute = rng.choice([0, 15, 30, 45], size=n)
    return [
        datetime(int(year[i]), int(months[i]) + 1, int(day[i]),
                 int(hours[i]), int(minute[i]))
        for i in range(n)
    ]


def _sample_durations(rng, n, body_median, body_sigma, tail_frac, tail_alpha,
                      tail_start, cap_min):
    """Log-normal body plus Pareto tail, rounded to 15-minute multiples."""
    body = rng.lognormal(mean=math.log(body_median), sigma=body_sigma, size=n)
    tail = tail_start * (1.0 + rng.pareto(tail_alpha, size=n))
    is_tail = rng.random(n) < tail_frac
    dur = np.where(is_tail, tail, body)
    dur = np.clip(np.round(dur / STEP_MIN) * STEP_MIN, STEP_MIN, cap_min)
    return dur.astype(int)


def _calibrate_customers(rng, durations, county_ids, customer_base,
                         target_probability, horizon_minutes):
    """Draw affected-customer counts, then rescale so the dataset-wide
    probability lands on the calibration target."""
    bases = np.array([customer_base[c] for c in county_ids], dtype=float)
    raw = rng.lognormal(mean=0.0, sigma=1.1, size=len(durations)) * bases * 2e-3
    raw = np.maximum(raw, 1.0)

    target_lost = target_probability * horizon_minutes * sum(customer_base.values())
    scale = target_lost / float(np.dot(raw, durations))
    customers = np.minimum(np.maximum(np.round(raw * scale), 1.0), bases)

    # absorb the integer-rounding residual into the largest-county records
    residual = target_lost - float(np.dot(customers, durations))
    order = np.argsort(-bases)
    for idx in order:
        if abs(residual) < durations[idx]:
            break
        room = bases[idx] - customers[idx] if residual > 0 else customers[idx] - 1
        delta = math.copysign(min(abs(residual) / durations[idx], room), residual)
        delta = math.trunc(delta)
        customers[idx] += delta
        residual -= delta * durations[idx]
    return customers.astype(int)


def synthetic_outage_dataset(n_records: int = 55_000, seed: int = 7,
                             target_probability: float = 6.3e-4,
                             max_duration_min: int = 7200,
                             counties: dict[str, int] | None = None,
                             years=(2020, 2021, 2022, 2023)) -> OutageDataset:
    """Four-year outage history with a forced worst event.

    The first record is the longest outage (``max_duration_min``, default
    five days) pinned to a mid-December storm so that downstream solar
    traces see storm-level cloud cover during it.
    """
    rng = np.random.default_rng(seed)
    counties = dict(counties or _COUNTIES)
    names = list(counties)

    horizon_start = datetime(min(years), 1, 1)
    horizon_end = datetime(max(years) + 1, 1, 1)
    horizon_minutes = int((horizon_end - horizon_start).total_seconds() // 60)

    county_ids = [names[i] for i in rng.integers(0, len(names), size=n_records)]
    starts = _sample_starts(rng, n_records, years)
    # sampled tail stays a day short of the forced maximum so the storm
    # event is the unambiguous energy extreme
    durations = _sample_durations(
        rng, n_records, body_median=75.0, body_sigma=1.2, tail_frac=0.03,
        tail_alpha=1.6, tail_start=900.0, cap_min=max_duration_min - 1440,
    )

    # forced extreme: the five-day December storm outage
    county_ids[0] = names[0]
    starts[0] = datetime(years[len(years) // 2], 12, 12, 8, 0)
    durations[0] = max_duration_min

    customers = _calibrate_customers(
        rng, durations, county_ids, counties, target_probability, horizon_minutes
    )
    records = [
        OutageRecord(county_ids[i], starts[i], int(durations[i]), int(customers[i]))
        for i in range(n_records)
    ]
    ds = OutageDataset(records, counties, horizon_start, horizon_end)
    ds.validate()
    return ds


def desk_outage_dataset(n_records: int = 200, seed: int = 11,
                        target_probability: float = 2.0e-4,
                        max_duration_min: int = 1800) -> OutageDataset:
    """Small outage set for desk-scale experiments (30 h worst event)."""
    rng = np.random.default_rng(seed)
    counties = {"D01": 120_000, "D02": 90_000, "D03": 60_000}
    names = list(counties)
    years = (2021, 2022)
    horizon_start = datetime(years[0], 1, 1)
    horizon_end = datetime(years[-1] + 1, 1, 1)
    horizon_minutes = int((horizon_end - horizon_start).total_seconds() // 60)

    county_ids = [names[i] for i in rng.integers(0, len(names), size=n_records)]
    starts = _sample_starts(rng, n_records, years)
    durations = _sample_durations(
        rng, n_records, body_median=90.0, body_sigma=1.0, tail_frac=0.04,
        tail_alpha=1.8, tail_start=600.0, cap_min=max_duration_min - STEP_MIN,
    )
    county_ids[0] = names[0]
    starts[0] = datetime(years[0], 12, 14, 17, 0)
    durations[0] = max_duration_min

    customers = _calibrate_customers(
        rng, durations, county_ids, counties, target_probability, horizon_minutes
    )
    records = [
        OutageRecord(county_ids[i], starts[i], int(durations[i]), int(customers[i]))
        for i in range(n_records)
    ]
    ds = OutageDataset(records, counties, horizon_start, horizon_end)
    ds.validate()
    return ds


def synthetic_demand_kw(peak_kw: float = 2200.0, amplitude_ratio: float = 1.5,
                        seed: int = 7) -> np.ndarray:
    """One year of 15-minute facility demand (kW).

    Round-the-clock load with an evening peak, winter/summer seasonal lift
    and mild weekday structure.  ``amplitude_ratio`` fixes
    (max - min) / mean; the annual peak lands on a winter evening.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(STEPS_PER_YEAR)
    hour = (t % STEPS_PER_DAY) * STEP_MIN / 60.0
    doy = t // STEPS_PER_DAY

    diurnal = (
        0.62 * np.exp(-0.5 * ((hour - 18.5) / 2.6) ** 2)
        + 0.30 * np.exp(-0.5 * ((hour - 10.5) / 3.0) ** 2)
        - 0.28 * np.exp(-0.5 * ((hour - 3.5) / 2.4) ** 2)
    )
    seasonal = 0.16 * np.cos(2 * np.pi * (doy - 20) / 365.0) \
        + 0.06 * np.cos(4 * np.pi * (doy - 15) / 365.0)
    weekday = np.where((doy % 7) < 5, 0.02, -0.05)
    noise = rng.normal(0.0, 0.015, size=STEPS_PER_YEAR)
    # slow random walk smoothed over a day, keeps neighbouring days coherent
    drift = np.convolve(rng.normal(0, 0.004, STEPS_PER_YEAR),
                        np.ones(STEPS_PER_DAY) / STEPS_PER_DAY, mode="same")

    shape = 1.0 + diurnal + seasonal + weekday + noise + drift
    shape = np.maximum(shape, 0.05)

    # brief scheduled equipment duty pulse (sterilization batch) riding on
    # the evening peak: one 15-minute step each day, so the annual peak is
    # only ever held for a single step
    pulse_step = int(18.5 * 4)
    days = np.arange(365)
    shape[days * STEPS_PER_DAY + pulse_step] += 0.055 * shape.max()

    mean = shape.mean()
    cur_ratio = (shape.max() - shape.min()) / mean
    scaled = mean + (shape - mean) * (amplitude_ratio / cur_ratio)
    scaled = np.maximum(scaled, 1e-3)
    return scaled * (peak_kw / scaled.max())


def reshape_demand_ratio(demand_kw: np.ndarray, target_ratio: float,
                         max_iter: int = 40) -> np.ndarray:
    """Rescale a profile around its mean to a target amplitude/mean ratio
    while preserving the annual energy integral.

    Negative excursions are clipped at zero and the energy loss is folded
    back multiplicatively, iterating until both the ratio and the integral
    hold to 1e-9 relative.
    """
    base = np.asarray(demand_kw, dtype=float)
    energy = base.sum()
    mean = base.mean()
    if target_ratio <= 0:
        return np.full_like(base, mean)
    out = base.copy()
    for _ in range(max_iter):
        cur = (out.max() - out.min()) / out.mean()
        if abs(cur - target_ratio) < 1e-9 * target_ratio and \
           abs(out.sum() - energy) < 1e-9 * energy:
            break
        out = out.mean() + (out - out.mean()) * (target_ratio / cur)
        out = np.maximum(out, 0.0)
        out *= energy / out.sum()
    return out


def synthetic_pv_capacity_factor(seed: int = 7,
                                 storm_days: tuple[int, int] = (344, 354)) -> np.ndarray:
    """One year of 15-minute solar capacity factors in [0, 1].

    Clear-sky bell per daylight period, seasonal day length and intensity,
    day-level cloudiness.  ``storm_days`` (day-of-year span, default
    mid-December) is forced to heavy overcast so the worst synthetic outage
    coincides with storm-level solar output.
    """
    rng = np.random.default_rng(seed + 1)
    t = np.arange(STEPS_PER_YEAR)
    hour = (t % STEPS_PER_DAY) * STEP_MIN / 60.0
    doy = t // STEPS_PER_DAY

    season = 0.5 - 0.38 * np.cos(2 * np.pi * (doy + 10) / 365.0)  # 0.12..0.88
    half_day = 4.3 + 1.9 * season  # hours from noon to sunrise/sunset
    x = (hour - 12.2) / half_day
    clear = np.maximum(np.cos(np.pi * np.clip(x, -1.0, 1.0) / 2.0), 0.0) ** 1.5

    cloud_daily = np.clip(rng.beta(2.2, 1.6, size=366), 0.05, 1.0)
    cloud = cloud_daily[doy]
    storm = (doy >= storm_days[0]) & (doy < storm_days[1])
    cloud = np.where(storm, 0.08, cloud)

    cf = clear * (0.35 + 0.65 * season) * cloud
    cf[cf < 1e-9] = 0.0
    return np.clip(cf, 0.0, 1.0)


def _year_timestamps():
    start = datetime(PROFILE_YEAR, 1, 1)
    return [start + timedelta(minutes=STEP_MIN * i) for i in range(STEPS_PER_YEAR)]


def write_outage_csvs(ds: OutageDataset, outage_path, customer_path) -> None:
    with open(outage_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["county_id", "start_iso8601", "duration_min",
                    "customers_affected"])
        for r in ds.records:
            w.writerow([r.county_id, r.start.isoformat(timespec="minutes"),
                        r.duration_min, r.customers_affected])
    with open(customer_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["county_id", "total_customers"])
        for county, total in ds.customer_base.items():
            w.writerow([county, total])


def write_demand_csv(demand_kw: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp_iso8601", "demand_kw"])
        for ts, val in zip(_year_timestamps(), demand_kw):
            w.writerow([ts.isoformat(timespec="minutes"), f"{val:.3f}"])


def write_pv_csv(capacity_factor: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp_iso8601", "capacity_factor"])
        for ts, val in zip(_year_timestamps(), capacity_factor):
            w.writerow([ts.isoformat(timespec="minutes"), f"{val:.5f}"])
