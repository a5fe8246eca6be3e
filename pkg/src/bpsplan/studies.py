"""Parameter sweeps reproducing the planning study suite.

Every study is a set of independent build/solve points over the same
pipeline, emitting a tidy :class:`StudyResult` (one row per sweep point per
technology where that makes sense).  Infeasible points are recorded and the
sweep continues.  Results carry the seed, catalog hash and scenario hash so
a run can be reproduced bit for bit.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .catalog import TechCatalog
from .model import EmergencyPurchasePolicy, FlexibilityPolicy, PolicyConfig
from .problems import (PlanningProblem, PlanOutcome, bundled_traces,
                       sized_outage_scenarios, solve_problem)
from .scenarios import DemandProfile, ScenarioSet
from .synthetic import reshape_demand_ratio


@dataclass
class StudyResult:
    study: str
    axes: dict[str, list]
    rows: list[dict]
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        keys: list[str] = []
        for row in self.rows:
            for key in row:
                if key not in keys:
                    keys.append(key)
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)

    def to_json(self) -> dict:
        return {"study": self.study, "axes": self.axes,
                "metadata": self.metadata, "rows": self.rows}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    def column(self, key, where=None) -> list:
        return [r[key] for r in self.rows
                if where is None or all(r.get(k) == v for k, v in where.items())]


def _metadata(problem: PlanningProblem, **extra) -> dict:
    md = {
        "catalog_hash": problem.catalog.content_hash(),
        "scenario_hash": problem.scenarios.content_hash(),
        "n_periods": len(problem.scenarios.periods),
        "p_total": problem.scenarios.p_total,
    }
    md.update(extra)
    return md


def _run_points(jobs: list[tuple], fn, max_workers: int = 1) -> list:
    """Evaluate fn over jobs, optionally with a bounded thread pool;
    results keep job order."""
    if max_workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, jobs))


def _shares(outcome: PlanOutcome, peak_kw: float) -> dict[str, float]:
    design = outcome.design
    shares = {}
    for name, d in design.fuel.items():
        shares[name] = d.total_kw / peak_kw
    for name, d in design.batteries.items():
        shares[name] = d.total_power_kw / peak_kw
    if design.pv_total_kw > 0:
        shares["pv"] = design.pv_total_kw / peak_kw
    return shares


def _design_rows(outcome: PlanOutcome, peak_kw: float, point: dict) -> list[dict]:
    rows = []
    if not outcome.optimal:
        row = dict(point)
        row.update({"status": outcome.status, "tech": None})
        return [row]
    shares = _shares(outcome, peak_kw)
    for tech, share in shares.items():
        row = dict(point)
        row.update({
            "status": "optimal",
            "tech": tech,
            "capacity_share_of_peak": share,
            "total_cost": outcome.cost.total_cost(),
            "total_emissions": outcome.emissions.total(),
        })
        rows.append(row)
    if not shares:
        row = dict(point)
        row.update({"status": "optimal", "tech": None,
                    "total_cost": outcome.cost.total_cost(),
                    "total_emissions": outcome.emissions.total()})
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# decarbonization frontier
# ---------------------------------------------------------------------------

def decarbonization_sweep(problem: PlanningProblem, reduction_targets,
                          max_workers: int = 1) -> StudyResult:
    """Capacity shares and cost along tightening expected-emission caps.

    The cap at target r is (1 - r) times the uncapped baseline emissions.
    """
    base_policy = replace(problem.policy, co2_cap_kg=None)
    baseline = solve_problem(problem.with_policy(base_policy))
    if not baseline.optimal:
        raise RuntimeError("uncapped baseline solve failed: "
                           f"{baseline.status}")
    base_emis = baseline.emissions.total()
    base_cost = baseline.cost.total_cost()
    peak = problem.scenarios.peak_demand_kw

    def point(r):
        cap = (1.0 - r) * base_emis
        policy = replace(problem.policy, co2_cap_kg=cap)
        out = solve_problem(problem.with_policy(policy))
        rows = _design_rows(out, peak, {"reduction_target": r,
                                        "co2_cap_kg": cap})
        for row in rows:
            if row["status"] == "optimal":
                row["cost_increase_vs_baseline"] = \
                    row["total_cost"] / base_cost - 1.0
        return rows

    rows = [r for rows in _run_points(list(reduction_targets), point,
                                      max_workers) for r in rows]
    return StudyResult(
        "decarbonization", {"reduction_target": list(reduction_targets)},
        rows, _metadata(problem, baseline_emissions_kg=base_emis,
                        baseline_cost=base_cost))


# ---------------------------------------------------------------------------
# hybrid shares
# ---------------------------------------------------------------------------

def hybrid_share_report(problem: PlanningProblem, base_techs,
                        primary_battery: str = "alair_primary",
                        max_workers: int = 1) -> StudyResult:
    """Optimal base / secondary-battery / primary-battery capacity split
    when each base technology anchors the hybrid."""
    peak = problem.scenarios.peak_demand_kw
    full_catalog = problem.catalog

    def point(base):
        fuels = [base] + ([primary_battery]
                          if primary_battery in full_catalog.fuel_techs
                          and primary_battery != base else [])
        sub = full_catalog.subset(fuel_names=fuels, include_pv=False)
        out = solve_problem(problem.with_catalog(sub))
        if not out.optimal:
            return [{"base_tech": base, "status": out.status, "tech": None}]
        base_share = out.design.fuel[base].total_kw / peak
        secondary = sum(d.total_power_kw
                        for d in out.design.batteries.values()) / peak
        primary = (out.design.fuel[primary_battery].total_kw / peak
                   if primary_battery in out.design.fuel else 0.0)
        base_capex = full_catalog.fuel_techs[base].power_capex
        return [{
            "base_tech": base, "status": "optimal",
            "base_power_capex": base_capex,
            "base_share": base_share,
            "secondary_battery_share": secondary,
            "primary_battery_share": primary,
            "total_cost": out.cost.total_cost(),
            "total_emissions": out.emissions.total(),
        }]

    rows = [r for rows in _run_points(list(base_techs), point, max_workers)
            for r in rows]
    return StudyResult("hybrid_share", {"base_tech": list(base_techs)}, rows,
                       _metadata(problem))


# ---------------------------------------------------------------------------
# emergency purchases
# ---------------------------------------------------------------------------

def emergency_purchase_study(problem: PlanningProblem, design_durations_h,
                             intervals_h, premium: float = 0.43,
                             truck_volume_liters: float | None = None,
                             demand: DemandProfile | None = None,
                             max_workers: int = 1) -> StudyResult:
    """Cost of systems designed for a maximum outage duration, with and
    without emergency fuel deliveries at each purchase interval."""
    if max(design_durations_h) > 120:
        raise ValueError("design durations above 120 h are out of scope")
    demand = demand or bundled_traces()[0]
    peak = demand.peak_kw

    jobs = []
    for dur in design_durations_h:
        jobs.append((dur, None))
        for iv in intervals_h:
            if iv < dur:  # an interval beyond the outage can never deliver
                jobs.append((dur, iv))

    def point(job):
        dur, iv = job
        scen = sized_outage_scenarios(demand, hours=dur,
                                      p_total=problem.scenarios.p_total)
        policy = replace(problem.policy, emergency_purchase=None) if iv is None \
            else replace(problem.policy, emergency_purchase=EmergencyPurchasePolicy(
                interval_hours=iv, premium=premium,
                truck_volume_liters=truck_volume_liters))
        out = solve_problem(replace(problem, scenarios=scen, policy=policy))
        row = {"design_duration_h": dur,
               "purchase_interval_h": iv if iv is not None else "none",
               "status": out.status}
        if out.optimal:
            row["total_cost"] = out.cost.total_cost()
            row["storage_kwh"] = sum(d.total_storage_kwh
                                     for d in out.design.fuel.values())
            row["purchase_cost"] = out.cost.emergency_purchase
        return [row]

    rows = [r for rows in _run_points(jobs, point, max_workers) for r in rows]
    by_key = {(r["design_duration_h"], r["purchase_interval_h"]): r
              for r in rows}
    for row in rows:
        base = by_key.get((row["design_duration_h"], "none"))
        if base and row["status"] == "optimal" and "total_cost" in base:
            row["savings_fraction"] = 1.0 - row["total_cost"] / base["total_cost"]
    return StudyResult(
        "emergency_purchase",
        {"design_duration_h": list(design_durations_h),
         "purchase_interval_h": list(intervals_h)},
        rows, _metadata(problem, premium=premium, peak_kw=peak,
                        truck_volume_liters=truck_volume_liters))


# ---------------------------------------------------------------------------
# demand variability
# ---------------------------------------------------------------------------

def _reshape_scenarios(scenarios: ScenarioSet, ratio: float,
                       demand: DemandProfile) -> ScenarioSet:
    """Re-cut every period's window from the annual profile rescaled to the
    target amplitude/mean ratio (annual energy preserved)."""
    from datetime import datetime

    reshaped = DemandProfile(reshape_demand_ratio(demand.values_kw, ratio),
                             demand.year, demand.facility_type)
    periods = []
    for p in scenarios.periods:
        if not p.source_start:
            raise ValueError("variability study needs profile-built periods "
                             "(missing source_start)")
        window = reshaped.window(datetime.fromisoformat(p.source_start),
                                 p.n_steps).copy()
        window[p.outage_duration_steps:] = 0.0
        periods.append(replace(p, demand_kw=window))
    return ScenarioSet(periods, scenarios.p_total, scenarios.n_total)


def demand_variability_study(problem: PlanningProblem, ratios,
                             reference_tech: str | None = None,
                             demand: DemandProfile | None = None,
                             max_workers: int = 1) -> StudyResult:
    """Battery shares and savings vs a peak-sized single-tech reference as
    demand amplitude varies (annual energy held constant).

    The reference design carries the nameplate at the reshaped peak and
    fuel storage for nameplate output over the longest outage, the common
    utility sizing rule.
    """
    demand = demand or bundled_traces()[0]
    reference_tech = reference_tech or problem.catalog.baseline_tech
    ref_tech = problem.catalog.fuel_techs[reference_tech]
    worst_h = max(p.outage_hours for p in problem.scenarios.periods)

    def point(ratio):
        scen = _reshape_scenarios(problem.scenarios, float(ratio), demand)
        peak = scen.peak_demand_kw
        opt = solve_problem(replace(problem, scenarios=scen))
        sub = problem.catalog.subset(fuel_names=[reference_tech],
                                     battery_names=[], include_pv=False)
        pinned = {reference_tech: {
            "power_kw": peak,
            "storage_kwh": peak * worst_h / ref_tech.efficiency,
        }}
        ref = solve_problem(PlanningProblem(scen, sub, problem.policy,
                                            solve_options=problem.solve_options),
                            pinned=pinned)
        row = {"amplitude_ratio": float(ratio), "status": opt.status,
               "peak_kw": peak}
        if opt.optimal and ref.optimal:
            ref_cost = ref.cost.total_cost()
            row["reference_cost"] = ref_cost
            row["total_cost"] = opt.cost.total_cost()
            row["savings_fraction"] = 1.0 - opt.cost.total_cost() / ref_cost
            row["secondary_battery_share"] = sum(
                d.total_power_kw for d in opt.design.batteries.values()) / peak
            row["primary_battery_share"] = sum(
                d.total_kw for n, d in opt.design.fuel.items()
                if problem.catalog.fuel_techs[n].efficiency >= 1.0) / peak
        return [row]

    rows = [r for rows in _run_points(list(ratios), point, max_workers)
            for r in rows]
    return StudyResult("demand_variability", {"amplitude_ratio": list(ratios)},
                       rows, _metadata(problem, reference_tech=reference_tech))


# ---------------------------------------------------------------------------
# demand flexibility
# ---------------------------------------------------------------------------

def flexibility_study(problem: PlanningProblem, power_fractions,
                      temporal_hours, max_workers: int = 1) -> StudyResult:
    """Cost reduction and battery share over the (power, temporal)
    flexibility grid, relative to the no-flexibility solve."""
    base = solve_problem(problem.with_policy(
        replace(problem.policy, flexibility=None)))
    if not base.optimal:
        raise RuntimeError(f"base solve failed: {base.status}")
    base_cost = base.cost.total_cost()
    peak = problem.scenarios.peak_demand_kw

    jobs = [(f, n) for f in power_fractions for n in temporal_hours]

    def point(job):
        f, n = job
        flex = FlexibilityPolicy(power_fraction=f, temporal_hours=n) \
            if f > 0 and n > 0 else None
        out = solve_problem(problem.with_policy(
            replace(problem.policy, flexibility=flex)))
        row = {"power_fraction": f, "temporal_hours": n,
               "status": out.status}
        if out.optimal:
            row["total_cost"] = out.cost.total_cost()
            row["savings_fraction"] = 1.0 - out.cost.total_cost() / base_cost
            row["battery_share"] = sum(
                d.total_power_kw for d in out.design.batteries.values()) / peak
        return [row]

    rows = [r for rows in _run_points(jobs, point, max_workers) for r in rows]
    return StudyResult(
        "flexibility",
        {"power_fraction": list(power_fractions),
         "temporal_hours": list(temporal_hours)},
        rows, _metadata(problem, base_cost=base_cost))


# ---------------------------------------------------------------------------
# solar PV
# ---------------------------------------------------------------------------

def solar_study(problem: PlanningProblem, pv_caps_kw, reduction_targets,
                max_workers: int = 1) -> StudyResult:
    """Savings from PV under pro-rata accounting over caps x decarbonization
    targets, plus the full-cost variant at every point.

    Savings compare against the same problem with PV excluded from the
    catalog at the same emission cap.
    """
    if problem.catalog.pv is None:
        raise ValueError("problem catalog has no PV entry")
    no_pv = problem.catalog.subset(include_pv=False)
    base = solve_problem(PlanningProblem(problem.scenarios, no_pv,
                                         replace(problem.policy,
                                                 co2_cap_kg=None),
                                         solve_options=problem.solve_options))
    if not base.optimal:
        raise RuntimeError(f"PV-free baseline failed: {base.status}")
    base_emis = base.emissions.total()

    jobs = [(cap, r, pro_rata)
            for cap in pv_caps_kw for r in reduction_targets
            for pro_rata in (True, False)]

    def point(job):
        cap, r, pro_rata = job
        co2 = (1.0 - r) * base_emis
        ref = solve_problem(PlanningProblem(
            problem.scenarios, no_pv,
            replace(problem.policy, co2_cap_kg=co2),
            solve_options=problem.solve_options))
        out = solve_problem(PlanningProblem(
            problem.scenarios, problem.catalog,
            replace(problem.policy, co2_cap_kg=co2, pv_cap_kw=cap,
                    pv_pro_rata=pro_rata),
            solve_options=problem.solve_options))
        row = {"pv_cap_kw": cap, "reduction_target": r,
               "pro_rata": pro_rata, "status": out.status}
        if out.optimal and ref.optimal:
            row["total_cost"] = out.cost.total_cost()
            row["reference_cost"] = ref.cost.total_cost()
            row["savings_fraction"] = 1.0 - out.cost.total_cost() \
                / ref.cost.total_cost()
            row["pv_built_kw"] = out.design.pv_total_kw
        return [row]

    rows = [r for rows in _run_points(jobs, point, max_workers) for r in rows]
    return StudyResult(
        "solar", {"pv_cap_kw": list(pv_caps_kw),
                  "reduction_target": list(reduction_targets)},
        rows, _metadata(problem, baseline_emissions_kg=base_emis))


# ---------------------------------------------------------------------------
# single-technology reports
# ---------------------------------------------------------------------------

def _single_tech_problem(problem: PlanningProblem, tech: str,
                         scen: ScenarioSet) -> PlanningProblem:
    cat = problem.catalog
    if tech in cat.fuel_techs:
        sub = cat.subset(fuel_names=[tech], battery_names=[], include_pv=False)
    elif tech in cat.batteries:
        sub = _battery_only_catalog(cat, tech)
    else:
        raise ValueError(f"unknown tech {tech!r}")
    return PlanningProblem(scen, sub, problem.policy,
                           solve_options=problem.solve_options)


def _battery_only_catalog(cat: TechCatalog, tech: str) -> TechCatalog:
    # bypass __post_init__: a battery-only catalog legitimately has no
    # baseline fuel tech
    sub = TechCatalog.__new__(TechCatalog)
    sub.fuel_techs = {}
    sub.batteries = {tech: cat.batteries[tech]}
    sub.pv = None
    sub.discount_rate = cat.discount_rate
    sub.baseline_tech = ""
    sub.source_path = cat.source_path
    sub.raw = cat.raw
    return sub


def cost_structure_report(problem: PlanningProblem, techs=None,
                          outage_hours: float = 8.0,
                          demand: DemandProfile | None = None,
                          max_workers: int = 1) -> StudyResult:
    """Per-technology cost components for one outage at the peak window,
    covered by a single-technology system."""
    demand = demand or bundled_traces()[0]
    scen = sized_outage_scenarios(demand, hours=outage_hours,
                                  p_total=problem.scenarios.p_total)
    techs = list(techs) if techs is not None else \
        list(problem.catalog.fuel_techs) + list(problem.catalog.batteries)

    def point(tech):
        out = solve_problem(_single_tech_problem(problem, tech, scen))
        row = {"tech": tech, "outage_hours": outage_hours,
               "status": out.status}
        if out.optimal:
            row.update({k: v for k, v in out.cost.as_dict().items()
                        if not isinstance(v, dict)})
        return [row]

    rows = [r for rows in _run_points(techs, point, max_workers) for r in rows]
    return StudyResult("cost_structure",
                       {"tech": techs, "outage_hours": [outage_hours]}, rows,
                       _metadata(problem))


def emission_comparison_report(problem: PlanningProblem, techs=None,
                               outage_hours: float = 1.0,
                               demand: DemandProfile | None = None,
                               baseline: str = "diesel",
                               max_workers: int = 1) -> StudyResult:
    """Per-technology emission split and reduction vs the baseline, both
    operating-only and net of replacement/charging."""
    demand = demand or bundled_traces()[0]
    scen = sized_outage_scenarios(demand, hours=outage_hours,
                                  p_total=problem.scenarios.p_total)
    techs = list(techs) if techs is not None else \
        list(problem.catalog.fuel_techs) + list(problem.catalog.batteries)
    if baseline not in techs:
        techs = [baseline] + techs

    def point(tech):
        out = solve_problem(_single_tech_problem(problem, tech, scen))
        row = {"tech": tech, "outage_hours": outage_hours,
               "status": out.status}
        if out.optimal:
            acct = out.emissions
            row["operating_kg"] = acct.operating
            row["replacement_kg"] = acct.replacement_net + acct.charging_test
            row["charging_recharge_kg"] = acct.charging_recharge
            row["total_kg"] = acct.total()
            row["replacement_share"] = (
                (acct.replacement_net + acct.charging_test) / acct.total()
                if acct.total() > 0 else 0.0)
        return [row]

    rows = [r for rows in _run_points(techs, point, max_workers) for r in rows]
    by_tech = {r["tech"]: r for r in rows}
    base_row = by_tech.get(baseline, {})
    if base_row.get("status") == "optimal":
        # operating-only comparison excludes replacement on both sides
        base_oper = base_row["operating_kg"] + base_row["charging_recharge_kg"]
        base_total = base_row["total_kg"]
        for row in rows:
            if row.get("status") != "optimal":
                continue
            oper = row["operating_kg"] + row["charging_recharge_kg"]
            row["operating_reduction_vs_baseline"] = 1.0 - oper / base_oper
            row["net_reduction_vs_baseline"] = 1.0 - row["total_kg"] / base_total
    return StudyResult("emission_comparison",
                       {"tech": techs, "outage_hours": [outage_hours]}, rows,
                       _metadata(problem, baseline=baseline))
