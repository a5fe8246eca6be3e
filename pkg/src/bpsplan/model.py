"""Two-stage stochastic program for backup power sizing and dispatch.

Investment columns (new/total power, fuel storage, battery energy, PV) are
shared across representative periods; dispatch columns are replicated per
period.  The deterministic equivalent is one sparse LP.

Unit conventions
----------------
Generation ``theta`` is metered in electrical kW; fuel draw divides by
conversion efficiency and multiplies by the step length, so fuel storage
lives in kWh_fuel.  Timestep weights are the dimensionless probabilities
of the scenario builder; cost and emission roll-ups multiply them by
``ANNUAL_HOURS`` so that weighted kW quantities become expected kWh per
year and every objective term is $/yr.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .catalog import TechCatalog
from .lp import INF, LinearProgram, LpBuilder
from .scenarios import ScenarioSet
from .solver import OPTIMAL, SolverResult

ANNUAL_HOURS = 8760.0

NEG_CLAMP = -1e-9  # solver values below this are an extraction error


class ModelError(ValueError):
    pass


class SolveStatusError(RuntimeError):
    """Raised when extraction is attempted on a non-optimal result."""

    def __init__(self, status: str):
        super().__init__(f"solver status is {status!r}, not optimal")
        self.status = status


# ---------------------------------------------------------------------------
# policy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmergencyPurchasePolicy:
    """Fuel (or primary-battery) deliveries during an outage.

    ``premium`` is a fractional markup: purchased fuel is priced at
    (1 + premium) times the regular fuel price.  Deliveries happen at
    multiples of ``interval_hours`` after outage start, each capped at
    ``max_per_event_kwh`` fuel units, optionally jointly capped by a truck
    volume shared across technologies.
    """

    interval_hours: float
    premium: float = 0.43
    max_per_event_kwh: float = INF
    truck_volume_liters: float | None = None

    def __post_init__(self):
        if self.premium < 0:
            raise ModelError("purchase premium must be >= 0")
        steps = self.interval_hours / 0.25
        if self.interval_hours <= 0 or abs(steps - round(steps)) > 1e-9:
            raise ModelError("interval_hours must be a positive multiple of "
                             "0.25 h")
        if self.truck_volume_liters is not None and self.truck_volume_liters <= 0:
            raise ModelError("truck_volume_liters must be positive")


@dataclass(frozen=True)
class FlexibilityPolicy:
    """Load shifting: up to ``power_fraction`` of each step's demand may be
    moved up to ``temporal_hours`` forward or backward; no shedding."""

    power_fraction: float
    temporal_hours: float

    def __post_init__(self):
        if not 0.0 <= self.power_fraction <= 1.0:
            raise ModelError("power_fraction must lie in [0, 1]")
        if self.temporal_hours < 0:
            raise ModelError("temporal_hours must be >= 0")

    @property
    def enabled(self) -> bool:
        return self.power_fraction > 0 and self.temporal_hours > 0


@dataclass(frozen=True)
class PolicyConfig:
    co2_cap_kg: float | None = None        # expected annual kgCO2
    emergency_purchase: EmergencyPurchasePolicy | None = None
    flexibility: FlexibilityPolicy | None = None
    pv_cap_kw: float | None = None
    pv_pro_rata: bool = False

    def __post_init__(self):
        if self.co2_cap_kg is not None and self.co2_cap_kg < 0:
            raise ModelError("co2_cap_kg must be >= 0")
        if self.pv_cap_kw is not None and self.pv_cap_kw < 0:
            raise ModelError("pv_cap_kw must be >= 0")


# ---------------------------------------------------------------------------
# variable index
# ---------------------------------------------------------------------------

class ModelIndex:
    """Structured key -> LP column map; per-timestep blocks are contiguous."""

    def __init__(self):
        self._scalars: dict[tuple, int] = {}
        self._blocks: dict[tuple, tuple[int, int]] = {}

    def put(self, key: tuple, col: int) -> None:
        self._scalars[key] = col

    def put_block(self, key: tuple, start: int, length: int) -> None:
        self._blocks[key] = (start, length)

    def col(self, *key) -> int:
        if key in self._scalars:
            return self._scalars[key]
        start, length = self._blocks[key[:-1]]
        t = key[-1]
        if not 0 <= t < length:
            raise KeyError(key)
        return start + t

    def block(self, *key) -> np.ndarray:
        start, length = self._blocks[key]
        return np.arange(start, start + length)

    def has(self, *key) -> bool:
        return key in self._scalars or key in self._blocks

    def scalar_keys(self):
        return self._scalars.keys()

    def block_keys(self):
        return self._blocks.keys()


@dataclass
class BuiltModel:
    lp: LinearProgram
    index: ModelIndex
    scenarios: ScenarioSet
    catalog: TechCatalog
    policy: PolicyConfig
    purchase_slots: dict[int, list[int]] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def annualized_weight(period) -> float:
    """Expected hours per year attributed to each step of the period."""
    return period.weight_per_step * ANNUAL_HOURS


def events_per_year(scenarios: ScenarioSet, period) -> float:
    """Expected outage events of this period's type per year.

    Total expected outage hours (P_total * 8760) are split over periods by
    their represented counts and divided by the set's mean outage duration,
    so the event rates integrate back to the observed outage time.
    """
    mean_h = scenarios.mean_outage_hours
    if mean_h <= 0 or scenarios.n_total == 0:
        return 0.0
    share = period.count_represented / scenarios.n_total
    return scenarios.p_total * ANNUAL_HOURS * share / mean_h


def purchase_slot_steps(period, interval_hours: float) -> list[int]:
    """Delivery timesteps: multiples of the interval after outage start,
    strictly inside the outage."""
    step_h = period.step_hours
    stride = int(round(interval_hours / step_h))
    if stride <= 0:
        return []
    return list(range(stride, period.outage_duration_steps, stride))


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------

def build(scenarios: ScenarioSet, catalog: TechCatalog, policy: PolicyConfig,
          existing: dict | None = None,
          pinned: dict | None = None) -> BuiltModel:
    """Assemble the deterministic-equivalent LP.

    Constraint families per fuel technology and period: storage headroom,
    full-tank start, interior fuel balance (electrical output divided by
    efficiency, times the step length), end-of-period top-up, capacity
    limit, and the startup ramp proxy ``chi_t >= theta_t - theta_{t-1}``.
    Batteries carry state-of-charge dynamics with the round-trip loss split
    between charge and discharge; PV dispatch is bounded by capacity factor
    times installed capacity; optional rows add emergency-purchase truck
    volumes, windowed load shifting, and the expected-emission cap.

    ``pinned`` fixes total capacities (per tech: power_kw, storage_kwh,
    energy_kwh, pv_kw) with equality rows, turning the solve into a
    dispatch-only evaluation of a prescribed design.
    """
    if not scenarios.periods:
        raise ModelError("empty scenario set")
    if not catalog.fuel_techs and not catalog.batteries:
        raise ModelError("catalog has no technologies")
    if (policy.pv_cap_kw is not None or policy.pv_pro_rata) and catalog.pv is None:
        raise ModelError("policy references PV but the catalog has none")
    if policy.co2_cap_kg is not None and policy.co2_cap_kg < 0:
        raise ModelError("co2_cap_kg must be >= 0")
    existing = existing or {}

    b = LpBuilder()
    ix = ModelIndex()
    r = catalog.discount_rate
    periods = scenarios.periods
    pv_tech = catalog.pv

    # ---- first-stage columns ------------------------------------------------
    for name, tech in catalog.fuel_techs.items():
        inv_p = tech.annualized_power_capex(r)
        inv_s = tech.annualized_storage_capex(r)
        repl = tech.replace_rate * tech.fuel_price  # $/kWh_fuel-yr
        ix.put(("omega", name), b.add_col(f"omega_{name}", obj=inv_p))
        ix.put(("delta", name), b.add_col(f"delta_{name}", obj=tech.fom_power))
        ix.put(("omega_stor", name),
               b.add_col(f"omega_stor_{name}", obj=inv_s))
        ix.put(("delta_stor", name),
               b.add_col(f"delta_stor_{name}", obj=tech.fom_storage + repl))
    for name, batt in catalog.batteries.items():
        ix.put(("omega_bp", name),
               b.add_col(f"omega_bp_{name}", obj=batt.annualized_power_capex(r)))
        ix.put(("delta_bp", name),
               b.add_col(f"delta_bp_{name}", obj=batt.fom_power))
        ix.put(("omega_be", name),
               b.add_col(f"omega_be_{name}", obj=batt.annualized_energy_capex(r)))
        ix.put(("delta_be", name),
               b.add_col(f"delta_be_{name}", obj=batt.fom_energy))
    if pv_tech is not None:
        mult = scenarios.p_total if policy.pv_pro_rata else 1.0
        cap = policy.pv_cap_kw
        if pv_tech.max_capacity_kw is not None:
            cap = min(cap, pv_tech.max_capacity_kw) if cap is not None \
                else pv_tech.max_capacity_kw
        ix.put(("omega_pv",),
               b.add_col("omega_pv", obj=pv_tech.annualized_capex(r) * mult))
        ix.put(("delta_pv",),
               b.add_col("delta_pv", obj=pv_tech.fom * mult,
                         ub=cap if cap is not None else INF))

    # total = existing + new
    for name in catalog.fuel_techs:
        ex = existing.get(name, {})
        b.add_row(f"cap_link_{name}",
                  [ix.col("delta", name), ix.col("omega", name)], [1.0, -1.0],
                  float(ex.get("power_kw", 0.0)), float(ex.get("power_kw", 0.0)))
        b.add_row(f"stor_link_{name}",
                  [ix.col("delta_stor", name), ix.col("omega_stor", name)],
                  [1.0, -1.0],
                  float(ex.get("storage_kwh", 0.0)),
                  float(ex.get("storage_kwh", 0.0)))
    for name in catalog.batteries:
        ex = existing.get(name, {})
        b.add_row(f"bp_link_{name}",
                  [ix.col("delta_bp", name), ix.col("omega_bp", name)],
                  [1.0, -1.0],
                  float(ex.get("power_kw", 0.0)), float(ex.get("power_kw", 0.0)))
        b.add_row(f"be_link_{name}",
                  [ix.col("delta_be", name), ix.col("omega_be", name)],
                  [1.0, -1.0],
                  float(ex.get("energy_kwh", 0.0)),
                  float(ex.get("energy_kwh", 0.0)))
    if pv_tech is not None:
        ex = existing.get(pv_tech.name, {})
        b.add_row("pv_link", [ix.col("delta_pv"), ix.col("omega_pv")],
                  [1.0, -1.0],
                  float(ex.get("power_kw", 0.0)), float(ex.get("power_kw", 0.0)))

    for name, pins in (pinned or {}).items():
        def _pin(field_name, key):
            if field_name in pins and ix.has(*key):
                val = float(pins[field_name])
                b.add_row(f"pin_{field_name}_{name}", [ix.col(*key)], [1.0],
                          val, val)
        if name in catalog.fuel_techs:
            _pin("power_kw", ("delta", name))
            _pin("storage_kwh", ("delta_stor", name))
        elif name in catalog.batteries:
            _pin("power_kw", ("delta_bp", name))
            _pin("energy_kwh", ("delta_be", name))
        elif pv_tech is not None and name == pv_tech.name:
            _pin("pv_kw", ("delta_pv",))
        else:
            raise ModelError(f"pinned capacity for unknown tech {name!r}")

    # ---- second-stage columns ----------------------------------------------
    purchase_slots: dict[int, list[int]] = {}
    ep = policy.emergency_purchase
    for p, period in enumerate(periods):
        n = period.n_steps
        w = annualized_weight(period)
        slots = purchase_slot_steps(period, ep.interval_hours) if ep else []
        purchase_slots[p] = slots
        for name, tech in catalog.fuel_techs.items():
            ix.put_block(("theta", name, p), b.add_cols(
                [f"theta_{name}_p{p}_t{t}" for t in range(n)],
                obj=w * tech.vom)[0], n)
            ix.put_block(("level", name, p), b.add_cols(
                [f"level_{name}_p{p}_t{t}" for t in range(n)])[0], n)
            ix.put_block(("chi", name, p), b.add_cols(
                [f"chi_{name}_p{p}_t{t}" for t in range(n)],
                obj=w * tech.startup_cost)[0], n)
            # top-up cost and the replacement-term credit cancel exactly
            topup_obj = w * tech.fuel_price - w * tech.fuel_price
            ix.put(("topup", name, p),
                   b.add_col(f"topup_{name}_p{p}", obj=topup_obj))
            if slots and tech.purchasable:
                cols = b.add_cols(
                    [f"purch_{name}_p{p}_t{t}" for t in slots],
                    ub=ep.max_per_event_kwh,
                    obj=w * tech.fuel_price * (1.0 + ep.premium))
                ix.put_block(("purchase", name, p), cols[0], len(slots))
        for name, batt in catalog.batteries.items():
            ix.put_block(("charge", name, p), b.add_cols(
                [f"charge_{name}_p{p}_t{t}" for t in range(n)])[0], n)
            ix.put_block(("discharge", name, p), b.add_cols(
                [f"discharge_{name}_p{p}_t{t}" for t in range(n)])[0], n)
            ix.put_block(("soc", name, p), b.add_cols(
                [f"soc_{name}_p{p}_t{t}" for t in range(n)])[0], n)
        if pv_tech is not None:
            ix.put_block(("pvgen", p), b.add_cols(
                [f"pvgen_p{p}_t{t}" for t in range(n)])[0], n)
        if policy.flexibility and policy.flexibility.enabled:
            f = policy.flexibility.power_fraction
            out_ub = f * period.demand_kw
            ix.put_block(("shift_out", p), b.add_cols(
                [f"sout_p{p}_t{t}" for t in range(n)], ub=out_ub)[0], n)
            in_ub = np.where(np.arange(n) < period.outage_duration_steps,
                             INF, 0.0)  # no dumping load past restoration
            ix.put_block(("shift_in", p), b.add_cols(
                [f"sin_p{p}_t{t}" for t in range(n)], ub=in_ub)[0], n)
            ix.put_block(("cum_out", p), b.add_cols(
                [f"cout_p{p}_t{t}" for t in range(n)])[0], n)
            ix.put_block(("cum_in", p), b.add_cols(
                [f"cin_p{p}_t{t}" for t in range(n)])[0], n)

    # ---- per-period rows -----------------------------------------------------
    for p, period in enumerate(periods):
        n = period.n_steps
        dt = period.step_hours
        slots = purchase_slots[p]
        for name, tech in catalog.fuel_techs.items():
            th = ix.block("theta", name, p)
            lv = ix.block("level", name, p)
            ch = ix.block("chi", name, p)
            dstor = ix.col("delta_stor", name)
            dcap = ix.col("delta", name)
            slot_cols = {t: ix.col("purchase", name, p, i)
                         for i, t in enumerate(slots)} \
                if ix.has("purchase", name, p) else {}
            draw = dt / tech.efficiency
            for t in range(n):
                cols = [lv[t], th[t]]
                vals = [1.0, draw]
                if t == 0:
                    cols.append(dstor)
                    vals.append(-1.0)
                else:
                    cols.append(lv[t - 1])
                    vals.append(-1.0)
                if t in slot_cols:
                    cols.append(slot_cols[t])
                    vals.append(-1.0)
                b.add_row(f"fuel_{name}_p{p}_t{t}", cols, vals, 0.0, 0.0)
                b.add_row(f"stcap_{name}_p{p}_t{t}", [lv[t], dstor],
                          [1.0, -1.0], -INF, 0.0)
                b.add_row(f"gcap_{name}_p{p}_t{t}", [th[t], dcap],
                          [1.0, -1.0], -INF, 0.0)
                if t == 0:
                    b.add_row(f"start_{name}_p{p}_t0", [ch[0], th[0]],
                              [1.0, -1.0], 0.0, INF)
                else:
                    b.add_row(f"start_{name}_p{p}_t{t}",
                              [ch[t], th[t], th[t - 1]], [1.0, -1.0, 1.0],
                              0.0, INF)
            b.add_row(f"topup_{name}_p{p}",
                      [ix.col("topup", name, p), lv[n - 1], dstor],
                      [1.0, 1.0, -1.0], 0.0, 0.0)
        for name, batt in catalog.batteries.items():
            cg = ix.block("charge", name, p)
            dcg = ix.block("discharge", name, p)
            soc = ix.block("soc", name, p)
            dbp = ix.col("delta_bp", name)
            dbe = ix.col("delta_be", name)
            eta = batt.one_way_efficiency
            for t in range(n):
                cols = [soc[t], cg[t], dcg[t]]
                vals = [1.0, -eta * dt, dt / eta]
                if t == 0:
                    cols.append(dbe)
                    vals.append(-1.0)
                else:
                    cols.append(soc[t - 1])
                    vals.append(-1.0)
                b.add_row(f"soc_{name}_p{p}_t{t}", cols, vals, 0.0, 0.0)
                b.add_row(f"socmax_{name}_p{p}_t{t}", [soc[t], dbe],
                          [1.0, -1.0], -INF, 0.0)
                b.add_row(f"chcap_{name}_p{p}_t{t}", [cg[t], dbp],
                          [1.0, -1.0], -INF, 0.0)
                b.add_row(f"dccap_{name}_p{p}_t{t}", [dcg[t], dbp],
                          [1.0, -1.0], -INF, 0.0)
        if pv_tech is not None:
            pvg = ix.block("pvgen", p)
            dpv = ix.col("delta_pv")
            cf = period.pv_capacity_factor
            for t in range(n):
                b.add_row(f"pvcap_p{p}_t{t}", [pvg[t], dpv],
                          [1.0, -float(cf[t])], -INF, 0.0)
        if ep and ep.truck_volume_liters is not None:
            for i, t in enumerate(slots):
                cols, vals = [], []
                for name, tech in catalog.fuel_techs.items():
                    if ix.has("purchase", name, p):
                        cols.append(ix.col("purchase", name, p, i))
                        vals.append(1.0 / tech.volumetric_density)
                if cols:
                    b.add_row(f"truck_p{p}_t{t}", cols, vals, -INF,
                              ep.truck_volume_liters)
        flex_on = policy.flexibility and policy.flexibility.enabled
        if flex_on:
            so = ix.block("shift_out", p)
            si = ix.block("shift_in", p)
            co = ix.block("cum_out", p)
            ci = ix.block("cum_in", p)
            shift_steps = int(round(policy.flexibility.temporal_hours / dt))
            for t in range(n):
                if t == 0:
                    b.add_row(f"cumo_p{p}_t0", [co[0], so[0]], [1.0, -1.0],
                              0.0, 0.0)
                    b.add_row(f"cumi_p{p}_t0", [ci[0], si[0]], [1.0, -1.0],
                              0.0, 0.0)
                else:
                    b.add_row(f"cumo_p{p}_t{t}", [co[t], co[t - 1], so[t]],
                              [1.0, -1.0, -1.0], 0.0, 0.0)
                    b.add_row(f"cumi_p{p}_t{t}", [ci[t], ci[t - 1], si[t]],
                              [1.0, -1.0, -1.0], 0.0, 0.0)
                fw = min(t + shift_steps, n - 1)
                # everything shifted out by t must reappear within the window,
                # and nothing may appear before it could have left
                b.add_row(f"win_out_p{p}_t{t}", [co[t], ci[fw]], [1.0, -1.0],
                          -INF, 0.0)
                b.add_row(f"win_in_p{p}_t{t}", [ci[t], co[fw]], [1.0, -1.0],
                          -INF, 0.0)

        # demand balance ties everything together
        for t in range(n):
            cols, vals = [], []
            for name in catalog.fuel_techs:
                cols.append(ix.col("theta", name, p, t))
                vals.append(1.0)
            for name in catalog.batteries:
                cols.append(ix.col("discharge", name, p, t))
                vals.append(1.0)
                cols.append(ix.col("charge", name, p, t))
                vals.append(-1.0)
            if pv_tech is not None:
                cols.append(ix.col("pvgen", p, t))
                vals.append(1.0)
            if flex_on:
                cols.append(ix.col("shift_in", p, t))
                vals.append(1.0)
                cols.append(ix.col("shift_out", p, t))
                vals.append(-1.0)
            d = float(period.demand_kw[t])
            b.add_row(f"balance_p{p}_t{t}", cols, vals, d, d)

    # ---- expected-emission cap -----------------------------------------------
    if policy.co2_cap_kg is not None:
        terms = emission_terms(ix, scenarios, catalog)
        cols, vals = [], []
        for col, coeff in _merge_terms(terms).items():
            cols.append(col)
            vals.append(coeff)
        b.add_row("co2_cap", cols, vals, -INF, policy.co2_cap_kg)

    lp = b.finalize()
    return BuiltModel(lp, ix, scenarios, catalog, policy, purchase_slots)


def emission_terms(ix: ModelIndex, scenarios: ScenarioSet,
                   catalog: TechCatalog) -> dict[str, dict[int, float]]:
    """Per-category linear emission coefficients (kgCO2/yr per unit).

    operating:   weighted fuel burn through efficiency, times fuel EF
    replacement: shelf-life turnover of the full store, minus the top-up
                 credit that avoids double counting outage consumption
    charging:    battery test cycles plus expected post-outage recharge at
                 the grid emission factor
    purchased:   weighted emergency deliveries at the fuel EF
    """
    terms: dict[str, dict[int, float]] = {
        "operating": {}, "replacement": {}, "charging_test": {},
        "charging_recharge": {}, "purchased": {},
    }

    def bump(cat, col, coeff):
        terms[cat][col] = terms[cat].get(col, 0.0) + coeff

    for name, tech in catalog.fuel_techs.items():
        ef = tech.fuel_emission_factor
        bump("replacement", ix.col("delta_stor", name),
             tech.replace_rate * ef)
        for p, period in enumerate(scenarios.periods):
            w = annualized_weight(period)
            th = ix.block("theta", name, p)
            for t in range(period.n_steps):
                bump("operating", th[t], w * ef / tech.efficiency)
            bump("replacement", ix.col("topup", name, p), -w * ef)
            if ix.has("purchase", name, p):
                for col in ix.block("purchase", name, p):
                    bump("purchased", int(col), w * ef)
    for name, batt in catalog.batteries.items():
        grid_ef = batt.charging_emission_factor
        dbe = ix.col("delta_be", name)
        bump("charging_test",
             dbe, batt.test_cycles_per_year / batt.round_trip_efficiency
             * grid_ef)
        eta = batt.one_way_efficiency
        for p, period in enumerate(scenarios.periods):
            lam = events_per_year(scenarios, period)
            soc_end = ix.col("soc", name, p, period.n_steps - 1)
            bump("charging_recharge", dbe, lam / eta * grid_ef)
            bump("charging_recharge", soc_end, -lam / eta * grid_ef)
    return terms


def _merge_terms(terms: dict[str, dict[int, float]]) -> dict[int, float]:
    merged: dict[int, float] = {}
    for cat in terms.values():
        for col, coeff in cat.items():
            merged[col] = merged.get(col, 0.0) + coeff
    return merged


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------

@dataclass
class FuelDesign:
    new_kw: float
    total_kw: float
    new_storage_kwh: float
    total_storage_kwh: float


@dataclass
class BatteryDesign:
    new_power_kw: float
    total_power_kw: float
    new_energy_kwh: float
    total_energy_kwh: float


@dataclass
class Design:
    fuel: dict[str, FuelDesign]
    batteries: dict[str, BatteryDesign]
    pv_new_kw: float = 0.0
    pv_total_kw: float = 0.0

    def capacity_kw(self, name: str) -> float:
        if name in self.fuel:
            return self.fuel[name].total_kw
        if name in self.batteries:
            return self.batteries[name].total_power_kw
        return 0.0

    def total_power_kw(self) -> float:
        return (sum(f.total_kw for f in self.fuel.values())
                + sum(bd.total_power_kw for bd in self.batteries.values()))


@dataclass
class DispatchSolution:
    generation: dict[str, np.ndarray]        # (periods, steps) kW
    fuel_level: dict[str, np.ndarray]        # kWh_fuel, end of step
    fuel_purchase: dict[str, np.ndarray]     # kWh_fuel per step
    fuel_topup: dict[str, np.ndarray]        # (periods,) kWh_fuel
    startup: dict[str, np.ndarray]           # kW started
    charge: dict[str, np.ndarray]
    discharge: dict[str, np.ndarray]
    soc: dict[str, np.ndarray]
    pv_gen: np.ndarray | None = None
    shift_in: np.ndarray | None = None
    shift_out: np.ndarray | None = None


def _clamped(values: np.ndarray) -> np.ndarray:
    """Zero out solver round-off; the -1e-9 threshold scales with the
    magnitude of the extracted block so large capacities tolerate the
    backend's absolute feasibility tolerance."""
    if not values.size:
        return values
    worst = float(values.min())
    scale = max(1.0, float(np.abs(values).max()))
    if worst < NEG_CLAMP * scale:
        raise ModelError(f"solver value {worst:.3e} below clamp threshold "
                         f"{NEG_CLAMP * scale:.3e}")
    return np.maximum(values, 0.0)


def extract(result: SolverResult, built: BuiltModel) -> tuple[Design,
                                                              DispatchSolution]:
    """Solver vector -> typed design and dispatch, clamped at -1e-9."""
    if result.status != OPTIMAL:
        raise SolveStatusError(result.status)
    x = result.x
    ix = built.index
    periods = built.scenarios.periods
    n_p = len(periods)

    fuel = {}
    for name in built.catalog.fuel_techs:
        vals = _clamped(np.array([
            x[ix.col("omega", name)], x[ix.col("delta", name)],
            x[ix.col("omega_stor", name)], x[ix.col("delta_stor", name)],
        ]))
        fuel[name] = FuelDesign(*vals)
    batteries = {}
    for name in built.catalog.batteries:
        vals = _clamped(np.array([
            x[ix.col("omega_bp", name)], x[ix.col("delta_bp", name)],
            x[ix.col("omega_be", name)], x[ix.col("delta_be", name)],
        ]))
        batteries[name] = BatteryDesign(*vals)
    design = Design(fuel, batteries)
    if built.catalog.pv is not None:
        design.pv_new_kw = float(_clamped(np.array([x[ix.col("omega_pv")]]))[0])
        design.pv_total_kw = float(_clamped(np.array([x[ix.col("delta_pv")]]))[0])

    def grid(kind, name):
        rows = []
        for p, period in enumerate(periods):
            rows.append(x[ix.block(kind, name, p)])
        return _clamped(np.vstack(rows))

    generation = {n: grid("theta", n) for n in built.catalog.fuel_techs}
    level = {n: grid("level", n) for n in built.catalog.fuel_techs}
    startup = {n: grid("chi", n) for n in built.catalog.fuel_techs}
    topup = {
        n: _clamped(np.array([x[ix.col("topup", n, p)] for p in range(n_p)]))
        for n in built.catalog.fuel_techs
    }
    purchase = {}
    for name in built.catalog.fuel_techs:
        arr = np.zeros((n_p, periods[0].n_steps))
        for p in range(n_p):
            if ix.has("purchase", name, p):
                slots = built.purchase_slots[p]
                vals = _clamped(x[ix.block("purchase", name, p)])
                arr[p, slots] = vals
        purchase[name] = arr
    charge = {n: grid("charge", n) for n in built.catalog.batteries}
    discharge = {n: grid("discharge", n) for n in built.catalog.batteries}
    soc = {n: grid("soc", n) for n in built.catalog.batteries}

    pv_gen = None
    if built.catalog.pv is not None:
        pv_gen = _clamped(np.vstack([x[ix.block("pvgen", p)]
                                     for p in range(n_p)]))
    shift_in = shift_out = None
    if built.policy.flexibility and built.policy.flexibility.enabled:
        shift_in = _clamped(np.vstack([x[ix.block("shift_in", p)]
                                       for p in range(n_p)]))
        shift_out = _clamped(np.vstack([x[ix.block("shift_out", p)]
                                        for p in range(n_p)]))

    dispatch = DispatchSolution(generation, level, purchase, topup, startup,
                                charge, discharge, soc, pv_gen, shift_in,
                                shift_out)
    return design, dispatch


# ---------------------------------------------------------------------------
# accounting
# ---------------------------------------------------------------------------

@dataclass
class CostEmissionBreakdown:
    fixed_power: float = 0.0
    fixed_storage: float = 0.0
    vom: float = 0.0
    fuel: float = 0.0
    replacement_net: float = 0.0
    startup: float = 0.0
    pv: float = 0.0
    emergency_purchase: float = 0.0
    emissions: dict[str, float] = field(default_factory=dict)

    def total_cost(self) -> float:
        return (self.fixed_power + self.fixed_storage + self.vom + self.fuel
                + self.replacement_net + self.startup + self.pv
                + self.emergency_purchase)

    def total_emissions(self) -> float:
        return sum(self.emissions.values())

    def as_dict(self) -> dict:
        return {
            "fixed_power": self.fixed_power,
            "fixed_storage": self.fixed_storage,
            "vom": self.vom,
            "fuel": self.fuel,
            "replacement_net": self.replacement_net,
            "startup": self.startup,
            "pv": self.pv,
            "emergency_purchase": self.emergency_purchase,
            "total_cost": self.total_cost(),
            "emissions": dict(self.emissions),
            "total_emissions": self.total_emissions(),
        }


def cost_breakdown(design: Design, dispatch: DispatchSolution,
                   scenarios: ScenarioSet, catalog: TechCatalog,
                   policy: PolicyConfig) -> CostEmissionBreakdown:
    """Recompute every objective component from the typed solution.

    The total matches the LP objective to rounding; the replacement
    component is net of the expected top-up credit, whose gross cost shows
    up under ``fuel`` instead.
    """
    r = catalog.discount_rate
    out = CostEmissionBreakdown()
    weights = np.array([annualized_weight(p) for p in scenarios.periods])

    for name, tech in catalog.fuel_techs.items():
        d = design.fuel[name]
        out.fixed_power += tech.annualized_power_capex(r) * d.new_kw \
            + tech.fom_power * d.total_kw
        out.fixed_storage += tech.annualized_storage_capex(r) * d.new_storage_kwh \
            + tech.fom_storage * d.total_storage_kwh
        gen = dispatch.generation[name]
        out.vom += float(np.sum(weights[:, None] * gen) * tech.vom)
        out.startup += float(np.sum(weights[:, None] * dispatch.startup[name])
                             * tech.startup_cost)
        topup_cost = float(weights @ dispatch.fuel_topup[name]) * tech.fuel_price
        out.fuel += topup_cost
        out.replacement_net += tech.replace_rate * tech.fuel_price \
            * d.total_storage_kwh - topup_cost
        if policy.emergency_purchase:
            purch = dispatch.fuel_purchase[name]
            out.emergency_purchase += float(np.sum(weights[:, None] * purch)) \
                * tech.fuel_price * (1.0 + policy.emergency_purchase.premium)
    for name, batt in catalog.batteries.items():
        d = design.batteries[name]
        out.fixed_power += batt.annualized_power_capex(r) * d.new_power_kw \
            + batt.fom_power * d.total_power_kw
        out.fixed_storage += batt.annualized_energy_capex(r) * d.new_energy_kwh \
            + batt.fom_energy * d.total_energy_kwh
    if catalog.pv is not None:
        mult = scenarios.p_total if policy.pv_pro_rata else 1.0
        out.pv = (catalog.pv.annualized_capex(r) * design.pv_new_kw
                  + catalog.pv.fom * design.pv_total_kw) * mult

    acct = emission_account(design, dispatch, scenarios, catalog)
    out.emissions = acct.as_dict()
    return out


@dataclass
class EmissionAccount:
    operating: float = 0.0
    replacement_net: float = 0.0
    charging_test: float = 0.0
    charging_recharge: float = 0.0
    purchased: float = 0.0

    @property
    def charging(self) -> float:
        return self.charging_test + self.charging_recharge

    def total(self) -> float:
        return (self.operating + self.replacement_net + self.charging
                + self.purchased)

    def as_dict(self) -> dict:
        return {
            "operating": self.operating,
            "replacement": self.replacement_net,
            "charging": self.charging,
            "charging_test": self.charging_test,
            "charging_recharge": self.charging_recharge,
            "purchased_fuel": self.purchased,
        }


def emission_account(design: Design, dispatch: DispatchSolution,
                     scenarios: ScenarioSet,
                     catalog: TechCatalog) -> EmissionAccount:
    """Expected annual kgCO2 by driver; mirrors the LP's emission-cap row."""
    acct = EmissionAccount()
    weights = np.array([annualized_weight(p) for p in scenarios.periods])

    for name, tech in catalog.fuel_techs.items():
        ef = tech.fuel_emission_factor
        gen = dispatch.generation[name]
        acct.operating += float(np.sum(weights[:, None] * gen)) \
            * ef / tech.efficiency
        credit = float(weights @ dispatch.fuel_topup[name]) * ef
        acct.replacement_net += tech.replace_rate \
            * design.fuel[name].total_storage_kwh * ef - credit
        acct.purchased += float(np.sum(weights[:, None]
                                       * dispatch.fuel_purchase[name])) * ef
    for name, batt in catalog.batteries.items():
        grid_ef = batt.charging_emission_factor
        energy = design.batteries[name].total_energy_kwh
        acct.charging_test += batt.test_cycles_per_year \
            / batt.round_trip_efficiency * energy * grid_ef
        eta = batt.one_way_efficiency
        for p, period in enumerate(scenarios.periods):
            lam = events_per_year(scenarios, period)
            soc_end = float(dispatch.soc[name][p, period.n_steps - 1])
            acct.charging_recharge += lam * max(energy - soc_end, 0.0) \
                / eta * grid_ef
    return acct


# ---------------------------------------------------------------------------
# dispatch validation
# ---------------------------------------------------------------------------

def validate_dispatch(design: Design, dispatch: DispatchSolution,
                      scenarios: ScenarioSet, catalog: TechCatalog,
                      policy: PolicyConfig,
                      tol: float = 1e-6) -> list[str]:
    """Replay a dispatch through every model constraint; returns violations.

    The demand-balance tolerance is ``tol`` times the scenario peak demand,
    matching the model's stated residual guarantee.
    """
    issues: list[str] = []
    peak = max(scenarios.peak_demand_kw, 1.0)
    for p, period in enumerate(scenarios.periods):
        n = period.n_steps
        dt = period.step_hours
        supply = np.zeros(n)
        for name, tech in catalog.fuel_techs.items():
            gen = dispatch.generation[name][p]
            level = dispatch.fuel_level[name][p]
            purch = dispatch.fuel_purchase[name][p]
            cap = design.fuel[name].total_kw
            stor = design.fuel[name].total_storage_kwh
            if np.any(gen > cap + tol * peak):
                issues.append(f"{name} p{p}: generation above capacity")
            if np.any(level > stor + tol * max(stor, 1.0)):
                issues.append(f"{name} p{p}: fuel level above storage")
            prev = stor
            for t in range(n):
                expected = prev - gen[t] * dt / tech.efficiency + purch[t]
                if abs(level[t] - expected) > tol * max(stor, 1.0):
                    issues.append(f"{name} p{p} t{t}: fuel balance residual "
                                  f"{level[t] - expected:.3e}")
                    break
                prev = level[t]
            consumed = float(gen.sum()) * dt / tech.efficiency
            bought = float(purch.sum())
            resid = level[n - 1] + consumed - bought - stor
            if abs(resid) > tol * max(stor, 1.0):
                issues.append(f"{name} p{p}: fuel conservation residual "
                              f"{resid:.3e}")
            supply += gen
        for name, batt in catalog.batteries.items():
            cg = dispatch.charge[name][p]
            dcg = dispatch.discharge[name][p]
            soc = dispatch.soc[name][p]
            bd = design.batteries[name]
            if np.any(cg > bd.total_power_kw + tol * peak) or \
               np.any(dcg > bd.total_power_kw + tol * peak):
                issues.append(f"{name} p{p}: battery power above capacity")
            if np.any(soc > bd.total_energy_kwh + tol * max(bd.total_energy_kwh, 1.0)):
                issues.append(f"{name} p{p}: SOC above energy capacity")
            eta = batt.one_way_efficiency
            prev = bd.total_energy_kwh
            for t in range(n):
                expected = prev + eta * cg[t] * dt - dcg[t] * dt / eta
                if abs(soc[t] - expected) > tol * max(bd.total_energy_kwh, 1.0):
                    issues.append(f"{name} p{p} t{t}: SOC balance residual")
                    break
                prev = soc[t]
            supply += dcg - cg
        if dispatch.pv_gen is not None:
            pvg = dispatch.pv_gen[p]
            limit = design.pv_total_kw * period.pv_capacity_factor
            if np.any(pvg > limit + tol * peak):
                issues.append(f"p{p}: PV above availability")
            supply += pvg
        demand = period.demand_kw.copy()
        if dispatch.shift_in is not None:
            si, so = dispatch.shift_in[p], dispatch.shift_out[p]
            f = policy.flexibility.power_fraction
            if np.any(so > f * period.demand_kw + tol * peak):
                issues.append(f"p{p}: shift-out above power flexibility")
            if abs(si.sum() - so.sum()) > tol * max(so.sum(), 1.0):
                issues.append(f"p{p}: shifted load not conserved")
            shift_steps = int(round(policy.flexibility.temporal_hours / dt))
            co = np.cumsum(so)
            ci = np.cumsum(si)
            fw = np.minimum(np.arange(n) + shift_steps, n - 1)
            if np.any(co - ci[fw] > tol * peak) or np.any(ci - co[fw] > tol * peak):
                issues.append(f"p{p}: shifted load leaves the +-"
                              f"{policy.flexibility.temporal_hours}h window")
            demand = demand - so + si
        resid = np.abs(supply - demand)
        if np.any(resid > tol * peak):
            t = int(np.argmax(resid))
            issues.append(f"p{p} t{t}: demand balance residual "
                          f"{resid[t]:.3e}")
    return issues
