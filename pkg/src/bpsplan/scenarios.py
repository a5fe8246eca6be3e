"""Representative outage periods for the stochastic program.

Clusters historical outages on (duration, start month, start hour), snaps
each cluster to its medoid so every representative period is a real event
window, optionally appends the two extreme periods (peak in-window demand
and largest in-window energy), and attaches calendar-aligned demand and
solar traces with per-timestep probability weights.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .outages import OutageDataset, total_outage_probability

N_STEPS_DEFAULT = 480
STEP_MINUTES = 15
STEPS_PER_YEAR = 365 * 24 * 60 // STEP_MINUTES


# ---------------------------------------------------------------------------
# year-long traces
# ---------------------------------------------------------------------------

def _year_step(profile_year: int, when: datetime) -> int:
    """Map a timestamp from any year onto the profile year's step index.
    Feb 29 folds onto Feb 28."""
    month, day = when.month, when.day
    if month == 2 and day == 29:
        day = 28
    anchor = datetime(profile_year, month, day, when.hour, when.minute)
    delta = anchor - datetime(profile_year, 1, 1)
    return int(delta.total_seconds() // (STEP_MINUTES * 60)) % STEPS_PER_YEAR


@dataclass
class DemandProfile:
    """One year of facility demand at 15-minute resolution."""

    values_kw: np.ndarray
    year: int
    facility_type: str = "generic"

    def __post_init__(self):
        self.values_kw = np.asarray(self.values_kw, dtype=float)
        if len(self.values_kw) < STEPS_PER_YEAR:
            raise ValueError(
                f"demand profile must cover a full year "
                f"({STEPS_PER_YEAR} steps), got {len(self.values_kw)}")
        if np.any(self.values_kw < 0):
            raise ValueError("negative demand values")

    @property
    def peak_kw(self) -> float:
        return float(self.values_kw.max())

    @property
    def mean_kw(self) -> float:
        return float(self.values_kw.mean())

    def window(self, start: datetime, n_steps: int) -> np.ndarray:
        idx = (_year_step(self.year, start) + np.arange(n_steps)) % STEPS_PER_YEAR
        return self.values_kw[idx]


@dataclass
class PvTrace:
    """One year of solar capacity factors at 15-minute resolution."""

    capacity_factor: np.ndarray
    year: int

    def __post_init__(self):
        self.capacity_factor = np.asarray(self.capacity_factor, dtype=float)
        if len(self.capacity_factor) < STEPS_PER_YEAR:
            raise ValueError("PV trace must cover a full year")
        if np.any((self.capacity_factor < 0) | (self.capacity_factor > 1)):
            raise ValueError("capacity factors must lie in [0, 1]")

    def window(self, start: datetime, n_steps: int) -> np.ndarray:
        idx = (_year_step(self.year, start) + np.arange(n_steps)) % STEPS_PER_YEAR
        return self.capacity_factor[idx]


def _load_trace_csv(path, value_column):
    timestamps, values = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != \
                ["timestamp_iso8601", value_column]:
            raise ValueError(f"bad header in {path}: {header}")
        for row in reader:
            if not row:
                continue
            timestamps.append(datetime.fromisoformat(row[0].strip()))
            values.append(float(row[1]))
    if len(values) < STEPS_PER_YEAR:
        raise ValueError(f"{path} is not a full year of 15-minute data")
    step = (timestamps[1] - timestamps[0]).total_seconds()
    if step != STEP_MINUTES * 60:
        raise ValueError(f"{path} is not at 15-minute resolution")
    return np.asarray(values), timestamps[0].year


def load_demand_csv(path, facility_type: str = "generic") -> DemandProfile:
    values, year = _load_trace_csv(path, "demand_kw")
    return DemandProfile(values, year, facility_type)


def load_pv_csv(path) -> PvTrace:
    values, year = _load_trace_csv(path, "capacity_factor")
    return PvTrace(values, year)


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------

@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list[float] = field(default_factory=list)


def _kmeans_pp_init(points, k, rng):
    n = len(points)
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i:] = points[rng.integers(n, size=k - i)]
            break
        probs = d2 / total
        centroids[i] = points[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((points - centroids[i]) ** 2, axis=1))
    return centroids


def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iter: int = 300,
           tol: float = 1e-10) -> ClusterModel:
    """Lloyd iterations with k-means++ seeding; deterministic for a seed.

    Requires k distinct points; an emptied cluster is reseeded at the point
    farthest from its centroid.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("points must be a non-empty 2-D array")
    n_distinct = len(np.unique(points, axis=0))
    if k < 1 or k > n_distinct:
        raise ValueError(f"k={k} outside [1, {n_distinct} distinct points]")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)

    history = []
    assignments = None
    for it in range(max_iter):
        d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        assignments = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(len(points)), assignments].sum())
        history.append(inertia)
        new_centroids = centroids.copy()
        for c in range(k):
            members = points[assignments == c]
            if len(members):
                new_centroids[c] = members.mean(axis=0)
            else:
                far = int(np.argmax(d2[np.arange(len(points)), assignments]))
                new_centroids[c] = points[far]
        shift = float(np.abs(new_centroids - centroids).max())
        centroids = new_centroids
        if shift < tol:
            break
    d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    assignments = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(len(points)), assignments].sum())
    history.append(inertia)
    return ClusterModel(k, centroids, assignments, inertia, len(history),
                        history)


def standardized_features(ds: OutageDataset,
                          weights=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Z-scored (duration, month, hour-sin, hour-cos) matrix.

    The start hour is embedded on the unit circle to remove the 23 -> 0
    discontinuity; ``weights`` scale duration, month and the hour pair.
    """
    dur = np.array([r.duration_min for r in ds.records], dtype=float)
    month = np.array([r.start.month for r in ds.records], dtype=float)
    hour = np.array([r.start.hour + r.start.minute / 60.0 for r in ds.records])
    angle = 2 * np.pi * hour / 24.0
    raw = np.column_stack([dur, month, np.sin(angle), np.cos(angle)])
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    std[std == 0] = 1.0
    z = (raw - mean) / std
    w = np.array([weights[0], weights[1], weights[2], weights[2]], dtype=float)
    return z * w


# ---------------------------------------------------------------------------
# representative periods
# ---------------------------------------------------------------------------

@dataclass
class RepresentativePeriod:
    id: str
    outage_duration_steps: int
    demand_kw: np.ndarray
    pv_capacity_factor: np.ndarray
    weight_per_step: float
    count_represented: int
    n_steps: int = N_STEPS_DEFAULT
    step_minutes: int = STEP_MINUTES
    source_county: str = ""
    source_start: str = ""
    source_duration_min: int = 0

    def __post_init__(self):
        self.demand_kw = np.asarray(self.demand_kw, dtype=float)
        self.pv_capacity_factor = np.asarray(self.pv_capacity_factor,
                                             dtype=float)
        if len(self.demand_kw) != self.n_steps:
            raise ValueError("demand trace length != n_steps")
        if len(self.pv_capacity_factor) != self.n_steps:
            raise ValueError("pv trace length != n_steps")
        if self.outage_duration_steps > self.n_steps:
            raise ValueError("outage longer than the period window")
        if self.weight_per_step < 0:
            raise ValueError("negative timestep weight")

    @property
    def outage_hours(self) -> float:
        return self.outage_duration_steps * self.step_minutes / 60.0

    @property
    def step_hours(self) -> float:
        return self.step_minutes / 60.0


@dataclass
class ScenarioSet:
    periods: list[RepresentativePeriod]
    p_total: float
    n_total: int

    def total_weight(self) -> float:
        return math.fsum(p.n_steps * p.weight_per_step for p in self.periods)

    def validate(self) -> None:
        if abs(self.total_weight() - self.p_total) > 1e-12:
            raise ValueError(
                f"period weights sum to {self.total_weight():.3e}, expected "
                f"{self.p_total:.3e}")
        if sum(p.count_represented for p in self.periods) != self.n_total:
            raise ValueError("represented counts do not partition the dataset")

    @property
    def mean_outage_hours(self) -> float:
        if self.n_total == 0:
            return 0.0
        return sum(p.count_represented * p.outage_hours
                   for p in self.periods) / self.n_total

    @property
    def peak_demand_kw(self) -> float:
        return max((float(p.demand_kw.max()) for p in self.periods),
                   default=0.0)

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "p_total": self.p_total,
            "n_total": self.n_total,
            "periods": [
                {
                    "id": p.id,
                    "n_steps": p.n_steps,
                    "step_minutes": p.step_minutes,
                    "outage_duration_steps": p.outage_duration_steps,
                    "weight_per_step": p.weight_per_step,
                    "count_represented": p.count_represented,
                    "source_county": p.source_county,
                    "source_start": p.source_start,
                    "source_duration_min": p.source_duration_min,
                    "demand_kw": [round(v, 6) for v in p.demand_kw.tolist()],
                    "pv_capacity_factor": [round(v, 8) for v in
                                           p.pv_capacity_factor.tolist()],
                }
                for p in self.periods
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ScenarioSet":
        if doc.get("schema_version") != 1:
            raise ValueError("unsupported scenario schema_version")
        periods = [
            RepresentativePeriod(
                id=p["id"],
                outage_duration_steps=p["outage_duration_steps"],
                demand_kw=np.array(p["demand_kw"]),
                pv_capacity_factor=np.array(p["pv_capacity_factor"]),
                weight_per_step=p["weight_per_step"],
                count_represented=p["count_represented"],
                n_steps=p["n_steps"],
                step_minutes=p["step_minutes"],
                source_county=p.get("source_county", ""),
                source_start=p.get("source_start", ""),
                source_duration_min=p.get("source_duration_min", 0),
            )
            for p in doc["periods"]
        ]
        return cls(periods, doc["p_total"], doc["n_total"])

    def content_hash(self) -> str:
        payload = json.dumps(self.to_json(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def timestep_weights(p_total: float, n_s: int, n_total: int,
                     n_steps: int) -> float:
    """Per-timestep probability weight: P_total * (N_s/N_total) * 1/n_steps."""
    if n_total <= 0 or n_steps <= 0:
        raise ValueError("n_total and n_steps must be positive")
    if n_s < 0 or n_s > n_total:
        raise ValueError("n_s must lie in [0, n_total]")
    if p_total < 0:
        raise ValueError("negative total probability")
    return p_total * (n_s / n_total) / n_steps


def _duration_steps(duration_min: int, n_steps: int) -> int:
    return min(max(1, math.ceil(duration_min / STEP_MINUTES)), n_steps)


def _make_period(pid, record, n_s, weight, demand, pv, n_steps):
    dur_steps = _duration_steps(record.duration_min, n_steps)
    d = demand.window(record.start, n_steps).copy()
    d[dur_steps:] = 0.0  # no service obligation after restoration
    cf = (pv.window(record.start, n_steps).copy() if pv is not None
          else np.zeros(n_steps))
    cf[dur_steps:] = 0.0  # system shuts down once the grid is back
    return RepresentativePeriod(
        id=pid,
        outage_duration_steps=dur_steps,
        demand_kw=d,
        pv_capacity_factor=cf,
        weight_per_step=weight,
        count_represented=n_s,
        n_steps=n_steps,
        source_county=record.county_id,
        source_start=record.start.isoformat(timespec="minutes"),
        source_duration_min=record.duration_min,
    )


def _window_stats(ds, demand, n_steps, chunk=4096):
    """Per-record in-window peak (kW) and energy (kWh) during the outage."""
    n = len(ds.records)
    peaks = np.empty(n)
    energies = np.empty(n)
    starts = np.array([_year_step(demand.year, r.start) for r in ds.records])
    dur_steps = np.array([_duration_steps(r.duration_min, n_steps)
                          for r in ds.records])
    step_h = STEP_MINUTES / 60.0
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        span = np.arange(n_steps)
        idx = (starts[lo:hi, None] + span[None, :]) % STEPS_PER_YEAR
        win = demand.values_kw[idx]
        mask = span[None, :] < dur_steps[lo:hi, None]
        win = win * mask
        peaks[lo:hi] = win.max(axis=1)
        energies[lo:hi] = win.sum(axis=1) * step_h
    return peaks, energies


def build_scenarios(ds: OutageDataset, demand: DemandProfile,
                    pv: PvTrace | None = None, k: int = 18,
                    include_extremes: bool = True, seed: int = 0,
                    n_steps: int = N_STEPS_DEFAULT,
                    feature_weights=(1.0, 1.0, 1.0)) -> ScenarioSet:
    """Cluster outages, snap to medoids, optionally append extreme periods.

    Each cluster is represented by the member record nearest its centroid.
    With ``include_extremes`` the outage windows with the highest in-window
    demand peak and the largest in-window energy are appended (deduplicated),
    each absorbing one count from the cluster it belongs to so the total
    count is preserved.
    """
    p_total = total_outage_probability(ds)
    n_total = len(ds.records)
    feats = standardized_features(ds, feature_weights)
    km = kmeans(feats, k, seed=seed)

    counts = np.bincount(km.assignments, minlength=k)
    medoids = np.full(k, -1, dtype=int)
    for c in range(k):
        members = np.nonzero(km.assignments == c)[0]
        if len(members) == 0:
            continue
        d2 = np.sum((feats[members] - km.centroids[c]) ** 2, axis=1)
        medoids[c] = int(members[np.argmin(d2)])

    extreme_idx: list[int] = []
    if include_extremes:
        peaks, energies = _window_stats(ds, demand, n_steps)
        peak_rec = int(np.argmax(peaks))
        energy_rec = int(np.argmax(energies))
        for idx in (peak_rec, energy_rec):
            if idx not in extreme_idx and idx not in medoids:
                extreme_idx.append(idx)

    counts = counts.astype(int)
    for idx in extreme_idx:
        donor = int(km.assignments[idx])
        if counts[donor] <= 0:
            raise RuntimeError("extreme-period donor cluster has no mass left")
        counts[donor] -= 1

    periods: list[RepresentativePeriod] = []
    for c in range(k):
        if medoids[c] < 0 or counts[c] <= 0:
            continue
        rec = ds.records[medoids[c]]
        w = timestep_weights(p_total, int(counts[c]), n_total, n_steps)
        periods.append(_make_period(f"cluster{c:03d}", rec, int(counts[c]), w,
                                    demand, pv, n_steps))
    for rank, idx in enumerate(extreme_idx):
        rec = ds.records[idx]
        w = timestep_weights(p_total, 1, n_total, n_steps)
        periods.append(_make_period(f"extreme{rank}", rec, 1, w, demand, pv,
                                    n_steps))

    out = ScenarioSet(periods, p_total, n_total)
    out.validate()
    return out


def scenario_set_from_records(ds: OutageDataset, demand: DemandProfile,
                              pv: PvTrace | None = None,
                              n_steps: int = N_STEPS_DEFAULT) -> ScenarioSet:
    """Every outage as its own period (the clustering ground truth)."""
    p_total = total_outage_probability(ds)
    n_total = len(ds.records)
    periods = [
        _make_period(f"record{i:05d}", rec, 1,
                     timestep_weights(p_total, 1, n_total, n_steps),
                     demand, pv, n_steps)
        for i, rec in enumerate(ds.records)
    ]
    out = ScenarioSet(periods, p_total, n_total)
    out.validate()
    return out


def clustering_error_curve(ds: OutageDataset, demand: DemandProfile,
                           k_values, solve_fn, pv: PvTrace | None = None,
                           include_extremes: bool = False, seed: int = 0,
                           n_steps: int = N_STEPS_DEFAULT) -> list[dict]:
    """Objective error of the clustered problem against the all-outages
    ground truth: |obj_k - obj_gt| / obj_gt per k."""
    ground_truth = scenario_set_from_records(ds, demand, pv, n_steps)
    obj_gt = solve_fn(ground_truth)
    if obj_gt is None:
        raise RuntimeError("ground-truth solve failed")
    rows = []
    for k in k_values:
        scen = build_scenarios(ds, demand, pv, k=k,
                               include_extremes=include_extremes, seed=seed,
                               n_steps=n_steps)
        obj_k = solve_fn(scen)
        rows.append({
            "k": int(k),
            "n_periods": len(scen.periods),
            "objective": obj_k,
            "ground_truth": obj_gt,
            "error": abs(obj_k - obj_gt) / abs(obj_gt),
        })
    return rows
