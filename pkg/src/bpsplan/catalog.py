"""Technology data model: costs, efficiencies, emissions, fuel logistics.

All per-technology numbers live in a catalog file (YAML, versioned schema)
with per-value source notes; code never embeds technology figures.  Fuel
generators, fuel cells and primary batteries share one shape -- primary
batteries are modeled as a swappable "fuel" with conversion efficiency 1.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import yaml

SCHEMA_VERSION = 1


class CatalogError(ValueError):
    pass


def annualize(capex: float, discount_rate: float, lifetime_years: float) -> float:
    """Capital recovery: capex * r(1+r)^L / ((1+r)^L - 1); straight-line at r=0."""
    if lifetime_years < 1:
        raise CatalogError(f"lifetime must be >= 1 year, got {lifetime_years}")
    if discount_rate < 0:
        raise CatalogError(f"negative discount rate {discount_rate}")
    if capex == 0.0:
        return 0.0
    if discount_rate == 0.0:
        return capex / lifetime_years
    growth = (1.0 + discount_rate) ** lifetime_years
    return capex * discount_rate * growth / (growth - 1.0)


@dataclass(frozen=True)
class FuelTech:
    """Generator, fuel cell, or primary battery backed by stored fuel."""

    name: str
    power_capex: float          # $/kW
    fom_power: float            # $/kW-yr
    vom: float                  # $/kWh_elec
    startup_cost: float         # $/kW started
    fuel_price: float           # $/kWh_fuel
    efficiency: float           # kWh_elec per kWh_fuel, in (0, 1]
    storage_capex: float        # $/kWh_fuel
    fom_storage: float          # $/kWh_fuel-yr
    fuel_emission_factor: float  # kgCO2/kWh_fuel, lifecycle
    shelf_life_years: float
    volumetric_density: float   # kWh_fuel per liter
    purchasable: bool = True
    lifetime_years: float = 20.0
    min_stable_output: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise CatalogError(f"{self.name}: efficiency must be in (0,1], "
                               f"got {self.efficiency}")
        if self.shelf_life_years <= 0:
            raise CatalogError(f"{self.name}: shelf_life_years must be > 0")
        if self.volumetric_density <= 0:
            raise CatalogError(f"{self.name}: volumetric_density must be > 0")
        for attr in ("power_capex", "fom_power", "vom", "startup_cost",
                     "fuel_price", "storage_capex", "fom_storage",
                     "fuel_emission_factor"):
            if getattr(self, attr) < 0:
                raise CatalogError(f"{self.name}: negative {attr}")

    @property
    def replace_rate(self) -> float:
        """Fuel replacements per year implied by shelf life."""
        return 1.0 / self.shelf_life_years

    def annualized_power_capex(self, discount_rate: float) -> float:
        return annualize(self.power_capex, discount_rate, self.lifetime_years)

    def annualized_storage_capex(self, discount_rate: float) -> float:
        return annualize(self.storage_capex, discount_rate, self.lifetime_years)


@dataclass(frozen=True)
class SecondaryBatteryTech:
    """Rechargeable storage; never eligible for emergency purchases."""

    name: str
    power_capex: float           # $/kW
    energy_capex: float          # $/kWh
    fom_power: float             # $/kW-yr
    fom_energy: float            # $/kWh-yr
    round_trip_efficiency: float
    charging_emission_factor: float  # kgCO2/kWh drawn from the grid
    test_cycles_per_year: float
    lifetime_years: float = 15.0

    def __post_init__(self):
        if not 0.0 < self.round_trip_efficiency <= 1.0:
            raise CatalogError(f"{self.name}: round_trip_efficiency must be "
                               f"in (0,1]")
        for attr in ("power_capex", "energy_capex", "fom_power", "fom_energy",
                     "charging_emission_factor", "test_cycles_per_year"):
            if getattr(self, attr) < 0:
                raise CatalogError(f"{self.name}: negative {attr}")

    @property
    def one_way_efficiency(self) -> float:
        return self.round_trip_efficiency ** 0.5

    def annualized_power_capex(self, discount_rate: float) -> float:
        return annualize(self.power_capex, discount_rate, self.lifetime_years)

    def annualized_energy_capex(self, discount_rate: float) -> float:
        return annualize(self.energy_capex, discount_rate, self.lifetime_years)


@dataclass(frozen=True)
class SolarPVTech:
    name: str
    capex: float                 # $/kW
    fom: float                   # $/kW-yr
    max_capacity_kw: float | None = None
    pro_rata: bool = False
    lifetime_years: float = 30.0

    def __post_init__(self):
        if self.capex < 0 or self.fom < 0:
            raise CatalogError(f"{self.name}: negative cost")

    def annualized_capex(self, discount_rate: float) -> float:
        return annualize(self.capex, discount_rate, self.lifetime_years)


@dataclass
class TechCatalog:
    fuel_techs: dict[str, FuelTech]
    batteries: dict[str, SecondaryBatteryTech]
    pv: SolarPVTech | None
    discount_rate: float
    baseline_tech: str
    source_path: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.fuel_techs and not self.batteries:
            raise CatalogError("no technologies in catalog")
        names = list(self.fuel_techs) + list(self.batteries) \
            + ([self.pv.name] if self.pv else [])
        if len(set(names)) != len(names):
            raise CatalogError("duplicate technology names")
        if self.baseline_tech not in self.fuel_techs:
            raise CatalogError(
                f"baseline tech {self.baseline_tech!r} missing from catalog")
        if self.discount_rate < 0:
            raise CatalogError("negative discount rate")

    @property
    def baseline(self) -> FuelTech:
        return self.fuel_techs[self.baseline_tech]

    def subset(self, fuel_names=None, battery_names=None,
               include_pv: bool | None = None) -> "TechCatalog":
        """Restricted copy; baseline falls back to the first fuel tech kept."""
        fuels = {n: t for n, t in self.fuel_techs.items()
                 if fuel_names is None or n in fuel_names}
        batts = {n: t for n, t in self.batteries.items()
                 if battery_names is None or n in battery_names}
        keep_pv = self.pv if (include_pv if include_pv is not None else True) else None
        baseline = self.baseline_tech if self.baseline_tech in fuels \
            else next(iter(fuels), None)
        if baseline is None:
            raise CatalogError("subset removed every fuel tech")
        return TechCatalog(fuels, batts, keep_pv, self.discount_rate,
                           baseline, self.source_path, self.raw)

    def content_hash(self) -> str:
        payload = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def emission_intensity(tech: FuelTech) -> float:
    """Delivered-electricity emission intensity, kgCO2 per kWh_elec."""
    return tech.fuel_emission_factor / tech.efficiency


def diesel_baseline_emission_intensity(catalog: TechCatalog | None = None) -> float:
    """Lifecycle intensity of the bundled baseline diesel entry (kg/kWh_elec)."""
    catalog = catalog or load_reference_catalog()
    return emission_intensity(catalog.baseline)


def _build_catalog(doc: dict, source_path=None) -> TechCatalog:
    if not isinstance(doc, dict):
        raise CatalogError("catalog document must be a mapping")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise CatalogError(f"unsupported schema_version {version!r}, "
                           f"expected {SCHEMA_VERSION}")
    try:
        fuel_list = [FuelTech(**spec) for spec in doc.get("fuel_techs", [])]
        batt_list = [SecondaryBatteryTech(**spec)
                     for spec in doc.get("batteries", [])]
        pv = SolarPVTech(**doc["pv"]) if doc.get("pv") else None
    except TypeError as exc:
        raise CatalogError(f"bad technology entry: {exc}") from exc
    names = [t.name for t in fuel_list] + [t.name for t in batt_list]
    if len(set(names)) != len(names):
        raise CatalogError("duplicate technology names in catalog file")
    fuels = {t.name: t for t in fuel_list}
    batteries = {t.name: t for t in batt_list}
    return TechCatalog(
        fuel_techs=fuels,
        batteries=batteries,
        pv=pv,
        discount_rate=float(doc.get("discount_rate", 0.10)),
        baseline_tech=doc.get("baseline_tech", ""),
        source_path=str(source_path) if source_path else None,
        raw=doc,
    )


def load_catalog(path) -> TechCatalog:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return _build_catalog(doc, source_path=path)


def load_reference_catalog() -> TechCatalog:
    """The bundled ten-technology representative catalog."""
    ref = resources.files("bpsplan.data").joinpath("reference_catalog.yaml")
    with ref.open() as fh:
        doc = yaml.safe_load(fh)
    return _build_catalog(doc, source_path="bpsplan://reference_catalog.yaml")
