"""Brute-force ground truth for tiny planning instances.

Enumerates a capacity grid, checks each candidate design with a greedy
merit-order dispatch, and accounts the cheapest feasible design exactly.
The greedy dispatcher certifies feasibility, not optimality, so the grid
optimum is an upper bound on the LP optimum; on instances with a unique
analytic optimum covered by the grid the two coincide.

Never used inside the optimizer.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .catalog import TechCatalog
from .model import (BatteryDesign, Design, DispatchSolution, FuelDesign,
                    PolicyConfig, cost_breakdown, purchase_slot_steps)
from .scenarios import ScenarioSet


class OracleError(RuntimeError):
    pass


@dataclass
class GridSpec:
    """Explicit candidate capacities per technology."""

    fuel: dict[str, tuple[list[float], list[float]]] = field(default_factory=dict)
    batteries: dict[str, tuple[list[float], list[float]]] = field(default_factory=dict)
    pv: list[float] = field(default_factory=lambda: [0.0])
    max_combinations: int = 1_000_000

    def axes(self):
        names, grids = [], []
        for name, (power, storage) in self.fuel.items():
            names.append(("fuel_power", name))
            grids.append(list(power))
            names.append(("fuel_storage", name))
            grids.append(list(storage))
        for name, (power, energy) in self.batteries.items():
            names.append(("batt_power", name))
            grids.append(list(power))
            names.append(("batt_energy", name))
            grids.append(list(energy))
        if self.pv:
            names.append(("pv", None))
            grids.append(list(self.pv))
        return names, grids

    def n_combinations(self) -> int:
        _, grids = self.axes()
        total = 1
        for g in grids:
            total *= max(len(g), 1)
        return total


@dataclass
class GreedyResult:
    feasible: bool
    witness_step: int | None = None
    generation: dict[str, np.ndarray] = field(default_factory=dict)
    fuel_level: dict[str, np.ndarray] = field(default_factory=dict)
    fuel_purchase: dict[str, np.ndarray] = field(default_factory=dict)
    charge: dict[str, np.ndarray] = field(default_factory=dict)
    discharge: dict[str, np.ndarray] = field(default_factory=dict)
    soc: dict[str, np.ndarray] = field(default_factory=dict)
    pv_gen: np.ndarray | None = None


def greedy_dispatch(design: Design, period, catalog: TechCatalog,
                    policy: PolicyConfig) -> GreedyResult:
    """Merit-order dispatch of one period for a fixed design.

    PV (free) runs first, then fuel units by ascending marginal cost, then
    batteries; emergency purchases refill tanks greedily at every delivery
    slot.  Demand is taken as given (no load shifting).  Returns the first
    step at which demand cannot be met when infeasible.
    """
    n = period.n_steps
    dt = period.step_hours
    order = sorted(catalog.fuel_techs,
                   key=lambda t: catalog.fuel_techs[t].vom
                   + catalog.fuel_techs[t].fuel_price
                   / catalog.fuel_techs[t].efficiency)
    res = GreedyResult(True)
    for name in catalog.fuel_techs:
        res.generation[name] = np.zeros(n)
        res.fuel_level[name] = np.zeros(n)
        res.fuel_purchase[name] = np.zeros(n)
    for name in catalog.batteries:
        res.charge[name] = np.zeros(n)
        res.discharge[name] = np.zeros(n)
        res.soc[name] = np.zeros(n)
    if catalog.pv is not None:
        res.pv_gen = np.zeros(n)

    level = {name: design.fuel[name].total_storage_kwh
             for name in catalog.fuel_techs}
    soc = {name: design.batteries[name].total_energy_kwh
           for name in catalog.batteries}
    ep = policy.emergency_purchase
    slots = set(purchase_slot_steps(period, ep.interval_hours)) if ep else set()

    for t in range(n):
        if ep and t in slots:
            truck_left = ep.truck_volume_liters \
                if ep.truck_volume_liters is not None else float("inf")
            for name in order:
                tech = catalog.fuel_techs[name]
                if not tech.purchasable:
                    continue
                room = design.fuel[name].total_storage_kwh - level[name]
                buy = min(room, ep.max_per_event_kwh,
                          truck_left * tech.volumetric_density)
                if buy > 0:
                    res.fuel_purchase[name][t] = buy
                    level[name] += buy
                    truck_left -= buy / tech.volumetric_density
        remaining = float(period.demand_kw[t])
        if res.pv_gen is not None:
            avail = design.pv_total_kw * float(period.pv_capacity_factor[t])
            take = min(avail, remaining)
            res.pv_gen[t] = take
            remaining -= take
        for name in order:
            tech = catalog.fuel_techs[name]
            cap = design.fuel[name].total_kw
            fuel_limited = level[name] * tech.efficiency / dt
            take = min(cap, remaining, fuel_limited)
            if take > 0:
                res.generation[name][t] = take
                level[name] -= take * dt / tech.efficiency
                remaining -= take
            res.fuel_level[name][t] = level[name]
        for name, batt in catalog.batteries.items():
            bd = design.batteries[name]
            eta = batt.one_way_efficiency
            energy_limited = soc[name] * eta / dt
            take = min(bd.total_power_kw, remaining, energy_limited)
            if take > 0:
                res.discharge[name][t] = take
                soc[name] -= take * dt / eta
                remaining -= take
            res.soc[name][t] = soc[name]
        if remaining > 1e-9 * max(1.0, float(period.demand_kw.max())):
            res.feasible = False
            res.witness_step = t
            return res
    return res


def _dispatch_solution(results: list[GreedyResult], design: Design,
                       scenarios: ScenarioSet,
                       catalog: TechCatalog) -> DispatchSolution:
    def stack(attr, names):
        return {name: np.vstack([getattr(r, attr)[name] for r in results])
                for name in names}

    generation = stack("generation", catalog.fuel_techs)
    level = stack("fuel_level", catalog.fuel_techs)
    purchase = stack("fuel_purchase", catalog.fuel_techs)
    startup = {
        name: np.maximum(np.diff(generation[name], axis=1, prepend=0.0), 0.0)
        for name in catalog.fuel_techs
    }
    topup = {
        name: np.array([design.fuel[name].total_storage_kwh
                        - r.fuel_level[name][-1] for r in results])
        for name in catalog.fuel_techs
    }
    return DispatchSolution(
        generation=generation,
        fuel_level=level,
        fuel_purchase=purchase,
        fuel_topup=topup,
        startup=startup,
        charge=stack("charge", catalog.batteries),
        discharge=stack("discharge", catalog.batteries),
        soc=stack("soc", catalog.batteries),
        pv_gen=(np.vstack([r.pv_gen for r in results])
                if results and results[0].pv_gen is not None else None),
    )


@dataclass
class BruteForceResult:
    design: Design
    cost: float
    dispatch: DispatchSolution
    n_feasible: int
    n_evaluated: int


def brute_force_plan(scenarios: ScenarioSet, catalog: TechCatalog,
                     policy: PolicyConfig, grid: GridSpec) -> BruteForceResult:
    """Cheapest feasible design over the capacity grid (exact accounting)."""
    names, grids = grid.axes()
    total = grid.n_combinations()
    if total > grid.max_combinations:
        raise OracleError(f"grid has {total} combinations, cap is "
                          f"{grid.max_combinations}")
    best = None
    n_feasible = 0
    for combo in itertools.product(*grids):
        values = dict(zip(names, combo))
        design = Design(
            fuel={name: FuelDesign(values[("fuel_power", name)],
                                   values[("fuel_power", name)],
                                   values[("fuel_storage", name)],
                                   values[("fuel_storage", name)])
                  for name in catalog.fuel_techs},
            batteries={name: BatteryDesign(values[("batt_power", name)],
                                           values[("batt_power", name)],
                                           values[("batt_energy", name)],
                                           values[("batt_energy", name)])
                       for name in catalog.batteries},
        )
        if catalog.pv is not None and ("pv", None) in values:
            design.pv_new_kw = design.pv_total_kw = values[("pv", None)]
        runs = []
        feasible = True
        for period in scenarios.periods:
            r = greedy_dispatch(design, period, catalog, policy)
            if not r.feasible:
                feasible = False
                break
            runs.append(r)
        if not feasible:
            continue
        n_feasible += 1
        dispatch = _dispatch_solution(runs, design, scenarios, catalog)
        cost = cost_breakdown(design, dispatch, scenarios, catalog,
                              policy).total_cost()
        if best is None or cost < best.cost:
            best = BruteForceResult(design, cost, dispatch, 0, 0)
    if best is None:
        raise OracleError("all grid combinations infeasible")
    best.n_feasible = n_feasible
    best.n_evaluated = total
    return best
