"""Config-driven command line: probe, plan, study.

One YAML config per run (hashable, reproducible); flags are limited to
``--config``, ``--out`` and ``--verbose``.  Exit codes: 0 success, 2 config
error, 3 infeasible model, 4 solver failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import studies as studies_mod
from .catalog import CatalogError, load_catalog
from .model import (EmergencyPurchasePolicy, FlexibilityPolicy, ModelError,
                    PolicyConfig)
from .outages import OutageDataError, duration_distribution, load_outage_csv, \
    total_outage_probability
from .problems import PlanningProblem, solve_problem
from .scenarios import build_scenarios, load_demand_csv, load_pv_csv
from .solver import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, \
    SolveOptions, check_certificates

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4

CONFIG_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    paths: dict
    seed: int
    scenario: dict = field(default_factory=dict)
    policy: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    studies: dict = field(default_factory=dict)
    output_dir: str = "out"
    raw: dict = field(default_factory=dict, repr=False)

    def config_hash(self) -> str:
        payload = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a YAML mapping")
    if doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version "
                          f"{doc.get('schema_version')!r}")
    if "seed" not in doc:
        raise ConfigError("seed is mandatory")
    paths = doc.get("paths") or {}
    for key in ("outages", "customers", "demand", "catalog"):
        if key not in paths:
            raise ConfigError(f"paths.{key} is required")
        if not Path(paths[key]).exists():
            raise ConfigError(f"paths.{key} does not exist: {paths[key]}")
    if "pv" in paths and paths["pv"] and not Path(paths["pv"]).exists():
        raise ConfigError(f"paths.pv does not exist: {paths['pv']}")
    out_dir = os.environ.get("BPSPLAN_OUT_DIR") or doc.get("output_dir", "out")
    return RunConfig(
        paths=paths,
        seed=int(doc["seed"]),
        scenario=doc.get("scenario") or {},
        policy=doc.get("policy") or {},
        solver=doc.get("solver") or {},
        studies=doc.get("studies") or {},
        output_dir=out_dir,
        raw=doc,
    )


def _policy_from_config(block: dict) -> PolicyConfig:
    ep = None
    if block.get("emergency_purchase"):
        epb = block["emergency_purchase"]
        ep = EmergencyPurchasePolicy(
            interval_hours=float(epb["interval_hours"]),
            premium=float(epb.get("premium", 0.43)),
            max_per_event_kwh=float(epb.get("max_per_event_kwh", np.inf)),
            truck_volume_liters=epb.get("truck_volume_liters"),
        )
    flex = None
    if block.get("flexibility"):
        fb = block["flexibility"]
        flex = FlexibilityPolicy(power_fraction=float(fb["power_fraction"]),
                                 temporal_hours=float(fb["temporal_hours"]))
    return PolicyConfig(
        co2_cap_kg=block.get("co2_cap_kg"),
        emergency_purchase=ep,
        flexibility=flex,
        pv_cap_kw=block.get("pv_cap_kw"),
        pv_pro_rata=bool(block.get("pv_pro_rata", False)),
    )


def _solve_options(block: dict) -> SolveOptions:
    return SolveOptions(
        tol=float(block.get("tol", 1e-9)),
        backend=block.get("backend", "auto"),
        max_iter=block.get("max_iter"),
    )


def _load_problem(cfg: RunConfig) -> PlanningProblem:
    ds = load_outage_csv(cfg.paths["outages"], cfg.paths["customers"])
    demand = load_demand_csv(cfg.paths["demand"])
    pv = load_pv_csv(cfg.paths["pv"]) if cfg.paths.get("pv") else None
    catalog = load_catalog(cfg.paths["catalog"])
    if pv is None:
        catalog = catalog.subset(include_pv=False)
    scen_cfg = cfg.scenario
    scenarios = build_scenarios(
        ds, demand, pv,
        k=int(scen_cfg.get("k", 18)),
        include_extremes=bool(scen_cfg.get("include_extremes", True)),
        seed=cfg.seed,
        n_steps=int(scen_cfg.get("n_steps", 480)),
        feature_weights=tuple(scen_cfg.get("feature_weights", (1.0, 1.0, 1.0))),
    )
    return PlanningProblem(scenarios, catalog,
                           _policy_from_config(cfg.policy),
                           solve_options=_solve_options(cfg.solver))


def _stamp(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "seed": cfg.seed}


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=float)


def cmd_probe(cfg: RunConfig, verbose: bool = False) -> int:
    """Outage statistics: overall probability plus the duration PMF/CDF."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = load_outage_csv(cfg.paths["outages"], cfg.paths["customers"])
    p_total = total_outage_probability(ds)
    dist = duration_distribution(ds, int(cfg.scenario.get("bin_minutes", 15)))
    with open(out_dir / "duration_distribution.csv", "w") as fh:
        fh.write("bin_start_min,bin_end_min,count,pmf,cdf\n")
        for lo, c, pmf, cdf in zip(dist.lower_edges, dist.counts, dist.pmf,
                                   dist.cdf):
            fh.write(f"{lo},{lo + dist.bin_minutes},{int(c)},"
                     f"{pmf:.12g},{cdf:.12g}\n")
    _write_json(out_dir / "probe_summary.json", {
        **_stamp(cfg),
        "total_outage_probability": p_total,
        "n_records": len(ds.records),
        "n_counties": len(ds.customer_base),
        "horizon_minutes": ds.horizon_minutes,
        "max_duration_min": max(r.duration_min for r in ds.records),
    })
    if verbose:
        print(f"P_total = {p_total:.6%} over {len(ds.records)} records")
    print(f"probe: wrote {out_dir / 'probe_summary.json'}")
    return EXIT_OK


def cmd_plan(cfg: RunConfig, verbose: bool = False) -> int:
    """Build scenarios, solve the sizing program, write design and
    breakdowns."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = _load_problem(cfg)
    _write_json(out_dir / "scenarios.json",
                {**_stamp(cfg), **problem.scenarios.to_json()})
    problem.solve_options.log_path = str(out_dir / "solve_log.jsonl")
    outcome = solve_problem(problem)
    if outcome.status == INFEASIBLE:
        print("plan: model infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    if outcome.status in (UNBOUNDED, ITERATION_LIMIT):
        print(f"plan: solver failed ({outcome.status})", file=sys.stderr)
        return EXIT_SOLVER
    report = check_certificates(outcome.built.lp, outcome.result)
    design = outcome.design
    _write_json(out_dir / "design.json", {
        **_stamp(cfg),
        "objective": outcome.objective,
        "certificates_ok": report.ok,
        "duality_gap": report.duality_gap,
        "fuel": {n: vars(d) for n, d in design.fuel.items()},
        "batteries": {n: vars(d) for n, d in design.batteries.items()},
        "pv_total_kw": design.pv_total_kw,
    })
    _write_json(out_dir / "breakdown.json",
                {**_stamp(cfg), **outcome.cost.as_dict()})
    if verbose:
        print(f"objective {outcome.objective:,.2f} $/yr; certificates "
              f"{'ok' if report.ok else 'FAILED'}")
    print(f"plan: wrote {out_dir / 'design.json'}")
    return EXIT_OK if report.ok else EXIT_SOLVER


_STUDY_RUNNERS = {
    "decarbonization": lambda prob, args, workers: studies_mod.decarbonization_sweep(
        prob, args.get("reduction_targets", [0.0, 0.25, 0.5, 0.75, 0.9]),
        max_workers=workers),
    "hybrid_share": lambda prob, args, workers: studies_mod.hybrid_share_report(
        prob, args.get("base_techs", list(prob.catalog.fuel_techs)),
        max_workers=workers),
    "emergency_purchase": lambda prob, args, workers: studies_mod.emergency_purchase_study(
        prob, args.get("design_durations_h", [8, 24, 72, 120]),
        args.get("intervals_h", [24, 48]),
        premium=args.get("premium", 0.43),
        truck_volume_liters=args.get("truck_volume_liters"),
        max_workers=workers),
    "demand_variability": lambda prob, args, workers: studies_mod.demand_variability_study(
        prob, args.get("ratios", [0.0, 0.75, 1.5, 2.5, 3.5]),
        max_workers=workers),
    "flexibility": lambda prob, args, workers: studies_mod.flexibility_study(
        prob, args.get("power_fractions", [0.0, 0.25, 0.5]),
        args.get("temporal_hours", [0.0, 4.0, 16.0, 24.0]),
        max_workers=workers),
    "solar": lambda prob, args, workers: studies_mod.solar_study(
        prob, args.get("pv_caps_kw", [500.0, 1000.0]),
        args.get("reduction_targets", [0.0, 0.5]),
        max_workers=workers),
    "cost_structure": lambda prob, args, workers: studies_mod.cost_structure_report(
        prob, args.get("techs"), args.get("outage_hours", 8.0),
        max_workers=workers),
    "emission_comparison": lambda prob, args, workers: studies_mod.emission_comparison_report(
        prob, args.get("techs"), args.get("outage_hours", 1.0),
        max_workers=workers),
}


def cmd_study(cfg: RunConfig, verbose: bool = False) -> int:
    """Run the studies listed in the config; CSV + JSON per study."""
    run = cfg.studies.get("run")
    if not run:
        raise ConfigError("studies.run must list at least one study")
    unknown = [s for s in run if s not in _STUDY_RUNNERS]
    if unknown:
        raise ConfigError(f"unknown study name(s): {', '.join(unknown)}; "
                          f"known: {', '.join(sorted(_STUDY_RUNNERS))}")
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = int(os.environ.get("BPSPLAN_WORKERS",
                                 cfg.studies.get("max_workers", 1)))
    problem = _load_problem(cfg)
    stamp = time.strftime("%Y%m%dT%H%M%S")
    for name in run:
        args = cfg.studies.get(name) or {}
        result = _STUDY_RUNNERS[name](problem, args, workers)
        result.metadata.update(_stamp(cfg))
        base = f"{name}_{stamp}_{cfg.config_hash()}"
        result.to_csv(out_dir / f"{base}.csv")
        result.write_json(out_dir / f"{base}.json")
        if verbose:
            print(f"study {name}: {len(result.rows)} rows")
        print(f"study: wrote {out_dir / (base + '.csv')}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bpsplan",
        description="Backup power system planning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("probe", "outage statistics"),
                            ("plan", "size and dispatch the system"),
                            ("study", "run configured study sweeps")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None,
                       help="override the configured output directory")
        p.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.output_dir = args.out
        handler = {"probe": cmd_probe, "plan": cmd_plan,
                   "study": cmd_study}[args.command]
        return handler(cfg, verbose=args.verbose)
    except (ConfigError, CatalogError, OutageDataError, ModelError,
            ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
