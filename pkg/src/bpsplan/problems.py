"""Planning-problem bundles and ready-made desk instances.

A :class:`PlanningProblem` ties a scenario set, a technology catalog and a
policy together with solver options, so studies and tests can treat
"build, solve, extract, account" as one call.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .catalog import TechCatalog, load_reference_catalog
from .model import (BuiltModel, CostEmissionBreakdown, Design,
                    DispatchSolution, EmissionAccount, PolicyConfig, build,
                    cost_breakdown, emission_account, extract)
from .scenarios import (DemandProfile, PvTrace, RepresentativePeriod,
                        ScenarioSet, build_scenarios, timestep_weights)
from .solver import OPTIMAL, SolveOptions, SolverResult, check_certificates, solve
from .synthetic import (PROFILE_YEAR, synthetic_demand_kw,
                        synthetic_outage_dataset, synthetic_pv_capacity_factor)


@dataclass
class PlanningProblem:
    scenarios: ScenarioSet
    catalog: TechCatalog
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    existing: dict | None = None
    solve_options: SolveOptions = field(default_factory=SolveOptions)

    def with_policy(self, policy: PolicyConfig) -> "PlanningProblem":
        return replace(self, policy=policy)

    def with_catalog(self, catalog: TechCatalog) -> "PlanningProblem":
        return replace(self, catalog=catalog)


@dataclass
class PlanOutcome:
    status: str
    objective: float | None
    design: Design | None
    dispatch: DispatchSolution | None
    cost: CostEmissionBreakdown | None
    emissions: EmissionAccount | None
    result: SolverResult
    built: BuiltModel

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def solve_problem(problem: PlanningProblem, pinned: dict | None = None,
                  verify_certificates: bool = False) -> PlanOutcome:
    built = build(problem.scenarios, problem.catalog, problem.policy,
                  existing=problem.existing, pinned=pinned)
    result = solve(built.lp, problem.solve_options)
    if result.status != OPTIMAL:
        return PlanOutcome(result.status, None, None, None, None, None,
                           result, built)
    if verify_certificates:
        check_certificates(built.lp, result).raise_on_failure()
    design, dispatch = extract(result, built)
    cost = cost_breakdown(design, dispatch, problem.scenarios,
                          problem.catalog, problem.policy)
    acct = emission_account(design, dispatch, problem.scenarios,
                            problem.catalog)
    return PlanOutcome(result.status, result.objective, design, dispatch,
                       cost, acct, result, built)


# ---------------------------------------------------------------------------
# hand-built instances
# ---------------------------------------------------------------------------

def make_period(demand_kw, outage_duration_steps=None, weight=None,
                p_total=6.34e-4, count=1, n_total=1, pv_cf=None,
                pid="p0") -> RepresentativePeriod:
    demand_kw = np.asarray(demand_kw, dtype=float)
    n = len(demand_kw)
    if outage_duration_steps is None:
        nz = np.nonzero(demand_kw)[0]
        outage_duration_steps = int(nz[-1]) + 1 if len(nz) else n
    if weight is None:
        weight = timestep_weights(p_total, count, n_total, n)
    return RepresentativePeriod(
        id=pid,
        outage_duration_steps=outage_duration_steps,
        demand_kw=demand_kw,
        pv_capacity_factor=(np.asarray(pv_cf, dtype=float) if pv_cf is not None
                            else np.zeros(n)),
        weight_per_step=weight,
        count_represented=count,
        n_steps=n,
    )


def single_period_scenarios(demand_kw, p_total=6.34e-4,
                            outage_duration_steps=None,
                            pv_cf=None) -> ScenarioSet:
    period = make_period(demand_kw, outage_duration_steps, p_total=p_total,
                         count=1, n_total=1, pv_cf=pv_cf)
    scen = ScenarioSet([period], p_total, 1)
    scen.validate()
    return scen


def outage_scenarios(demands: list[np.ndarray], counts: list[int] | None = None,
                     p_total: float = 6.34e-4,
                     pv_cfs: list | None = None) -> ScenarioSet:
    """Multi-period set from explicit demand traces; counts default to 1."""
    counts = counts or [1] * len(demands)
    n_total = sum(counts)
    periods = [
        make_period(d, p_total=p_total, count=c, n_total=n_total,
                    pv_cf=(pv_cfs[i] if pv_cfs else None), pid=f"p{i}")
        for i, (d, c) in enumerate(zip(demands, counts))
    ]
    scen = ScenarioSet(periods, p_total, n_total)
    scen.validate()
    return scen


def constant_outage_scenarios(demand_kw: float, hours: float,
                              n_steps: int | None = None,
                              p_total: float = 6.34e-4) -> ScenarioSet:
    """One flat outage of the given length at constant demand.

    The window is 480 steps unless ``n_steps`` says otherwise, with demand
    zero after restoration.
    """
    dur = int(round(hours * 4))
    n = n_steps if n_steps is not None else max(480, dur)
    demand = np.zeros(n)
    demand[:dur] = demand_kw
    return single_period_scenarios(demand, p_total=p_total,
                                   outage_duration_steps=dur)


def sized_outage_scenarios(demand: DemandProfile, hours: float,
                           start_step: int | None = None,
                           n_steps: int = 480,
                           p_total: float = 6.34e-4) -> ScenarioSet:
    """One outage of the given length cut from a demand profile at the
    window whose demand peaks (default) or at ``start_step``."""
    dur = int(round(hours * 4))
    values = demand.values_kw
    if start_step is None:
        peak_at = int(np.argmax(values))
        start_step = max(0, peak_at - dur // 2)
    idx = (start_step + np.arange(n_steps)) % len(values)
    window = values[idx].copy()
    window[dur:] = 0.0
    return single_period_scenarios(window, p_total=p_total,
                                   outage_duration_steps=dur)


# ---------------------------------------------------------------------------
# bundled desk problem
# ---------------------------------------------------------------------------

def bundled_traces(seed: int = 7):
    demand = DemandProfile(synthetic_demand_kw(seed=seed), PROFILE_YEAR,
                           "medical")
    pv = PvTrace(synthetic_pv_capacity_factor(seed=seed), PROFILE_YEAR)
    return demand, pv

_DESK_CACHE: dict = {}


def make_desk_problem(k: int = 6, include_extremes: bool = True,
                      fuel_names=("diesel", "ammonia", "hydrogen_fc"),
                      battery_names=("ironair",), include_pv: bool = False,
                      seed: int = 7, n_records: int = 5000,
                      policy: PolicyConfig | None = None) -> PlanningProblem:
    """Small but structurally complete problem on bundled synthetic data.

    Clusters a reduced synthetic outage history and appends the extreme
    periods, so the five-day storm window and the annual demand peak are
    both present.  Results are cached per configuration because tests
    re-use the same instance heavily.
    """
    key = (k, include_extremes, tuple(fuel_names), tuple(battery_names),
           include_pv, seed, n_records)
    if key not in _DESK_CACHE:
        ds = synthetic_outage_dataset(n_records=n_records, seed=seed)
        demand, pv = bundled_traces(seed)
        scen = build_scenarios(ds, demand, pv if include_pv else None, k=k,
                               include_extremes=include_extremes, seed=seed)
        catalog = load_reference_catalog().subset(
            fuel_names=list(fuel_names), battery_names=list(battery_names),
            include_pv=include_pv)
        _DESK_CACHE[key] = (scen, catalog)
    scen, catalog = _DESK_CACHE[key]
    return PlanningProblem(scen, catalog, policy or PolicyConfig())


def make_full_problem(policy: PolicyConfig | None = None,
                      include_pv: bool = True,
                      seed: int = 7) -> PlanningProblem:
    """The paper-scale pipeline: 55k outages, 18 clusters + 2 extremes,
    full ten-technology catalog, 480-step periods."""
    ds = synthetic_outage_dataset(seed=seed)
    demand, pv = bundled_traces(seed)
    scen = build_scenarios(ds, demand, pv if include_pv else None, k=18,
                           include_extremes=True, seed=seed)
    catalog = load_reference_catalog()
    if not include_pv:
        catalog = catalog.subset(include_pv=False)
    return PlanningProblem(scen, catalog, policy or PolicyConfig(),
                           solve_options=SolveOptions(backend="highs"))
