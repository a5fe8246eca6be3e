import dataclasses
import math

import numpy as np
import pytest

from bpsplan.catalog import load_reference_catalog
from bpsplan.lp import INF
from bpsplan.model import (ANNUAL_HOURS, EmergencyPurchasePolicy,
                           FlexibilityPolicy, ModelError, PolicyConfig,
                           SolveStatusError, annualized_weight, build,
                           cost_breakdown, emission_account, emission_terms,
                           extract, validate_dispatch)
from bpsplan.problems import (PlanningProblem, constant_outage_scenarios,
                              outage_scenarios, single_period_scenarios,
                              solve_problem)
from bpsplan.solver import INFEASIBLE, SolveOptions, check_certificates, solve


def ref_opts():
    return SolveOptions(backend="reference")


def test_forced_sizing_single_tech(tiny_problem):
    out = solve_problem(tiny_problem, verify_certificates=True)
    tech = tiny_problem.catalog.fuel_techs["diesel"]
    d = out.design.fuel["diesel"]
    assert d.total_kw == pytest.approx(100.0, rel=1e-9)
    assert d.total_storage_kwh == pytest.approx(4 * 100.0 * 0.25
                                                / tech.efficiency, rel=1e-9)
    assert d.new_kw == pytest.approx(d.total_kw)


def test_purchase_shrinks_storage(tiny_problem):
    base = solve_problem(tiny_problem)
    pol = PolicyConfig(emergency_purchase=EmergencyPurchasePolicy(
        interval_hours=0.5, premium=0.43))
    out = solve_problem(tiny_problem.with_policy(pol))
    eff = tiny_problem.catalog.fuel_techs["diesel"].efficiency
    assert out.design.fuel["diesel"].total_storage_kwh == pytest.approx(
        2 * 100.0 * 0.25 / eff, rel=1e-9)
    assert out.design.fuel["diesel"].total_storage_kwh < \
        base.design.fuel["diesel"].total_storage_kwh - 1e-9
    assert out.objective <= base.objective + 1e-9


def test_co2_cap_zero_diesel_infeasible(tiny_problem):
    out = solve_problem(tiny_problem.with_policy(PolicyConfig(co2_cap_kg=0.0)))
    assert out.status == INFEASIBLE


def test_negative_cap_rejected():
    with pytest.raises(ModelError):
        PolicyConfig(co2_cap_kg=-1.0)


def test_policy_validation():
    with pytest.raises(ModelError):
        EmergencyPurchasePolicy(interval_hours=0.3)
    with pytest.raises(ModelError):
        EmergencyPurchasePolicy(interval_hours=24.0, premium=-0.1)
    with pytest.raises(ModelError):
        FlexibilityPolicy(power_fraction=1.2, temporal_hours=4)


def test_pv_policy_without_pv_rejected(diesel_only):
    scen = constant_outage_scenarios(50.0, hours=1.0, n_steps=8)
    with pytest.raises(ModelError, match="PV"):
        build(scen, diesel_only, PolicyConfig(pv_cap_kw=100.0))


def test_extract_requires_optimal(tiny_problem):
    built = build(tiny_problem.scenarios, tiny_problem.catalog,
                  PolicyConfig(co2_cap_kg=0.0))
    res = solve(built.lp, ref_opts())
    with pytest.raises(SolveStatusError):
        extract(res, built)


def test_extract_clamps_round_off(tiny_problem):
    built = build(tiny_problem.scenarios, tiny_problem.catalog,
                  tiny_problem.policy)
    res = solve(built.lp, ref_opts())
    res.x = res.x.copy()
    res.x[res.x == 0.0] = -1e-12
    design, dispatch = extract(res, built)
    assert all(v.new_kw >= 0.0 for v in design.fuel.values())
    for arr in dispatch.generation.values():
        assert arr.min() >= 0.0


def test_objective_cancellation_identity(rng):
    """The printed fuel term and the replacement credit cancel on top-up
    columns for arbitrary coefficient draws."""
    for _ in range(100):
        w = float(rng.uniform(1e-8, 1e-3)) * ANNUAL_HOURS
        price = float(rng.uniform(0.01, 50.0))
        premium = float(rng.uniform(0.0, 2.0))
        topup = float(rng.uniform(0.0, 1e5))
        purchase = float(rng.uniform(0.0, 1e5))
        replace_rate = float(rng.uniform(0.05, 2.0))
        storage = float(rng.uniform(0.0, 1e6))
        printed = (w * price * (topup + (1 + premium) * purchase)
                   + replace_rate * storage * price - w * price * topup)
        simplified = (w * price * (1 + premium) * purchase
                      + replace_rate * storage * price)
        assert printed == pytest.approx(simplified, rel=1e-12, abs=1e-9)


def test_topup_column_truly_cancels(tiny_problem):
    built = build(tiny_problem.scenarios, tiny_problem.catalog,
                  tiny_problem.policy)
    col = built.index.col("topup", "diesel", 0)
    assert built.lp.obj[col] == 0.0


def test_fuel_conservation_invariant(diesel_battery, rng):
    demand = np.concatenate([rng.uniform(40, 120, size=12), np.zeros(4)])
    scen = single_period_scenarios(demand)
    pol = PolicyConfig(emergency_purchase=EmergencyPurchasePolicy(
        interval_hours=1.0, premium=0.43, max_per_event_kwh=60.0))
    prob = PlanningProblem(scen, diesel_battery, pol, solve_options=ref_opts())
    out = solve_problem(prob, verify_certificates=True)
    tech = diesel_battery.fuel_techs["diesel"]
    d = out.dispatch
    stor = out.design.fuel["diesel"].total_storage_kwh
    consumed = d.generation["diesel"][0].sum() * 0.25 / tech.efficiency
    bought = d.fuel_purchase["diesel"][0].sum()
    level_end = d.fuel_level["diesel"][0][-1]
    assert level_end + consumed - bought == pytest.approx(stor, rel=1e-7)
    assert d.fuel_topup["diesel"][0] == pytest.approx(stor - level_end,
                                                      rel=1e-7)
    assert validate_dispatch(out.design, d, scen, diesel_battery, pol) == []


def test_breakdown_matches_objective(diesel_battery, rng):
    demand = np.concatenate([rng.uniform(30, 150, size=12), np.zeros(4)])
    scen = single_period_scenarios(demand)
    pol = PolicyConfig(emergency_purchase=EmergencyPurchasePolicy(
        interval_hours=1.0, premium=0.2))
    prob = PlanningProblem(scen, diesel_battery, pol, solve_options=ref_opts())
    out = solve_problem(prob)
    assert out.cost.total_cost() == pytest.approx(out.objective, rel=1e-9)


def test_zero_probability_kills_dispatch_costs(diesel_battery):
    scen = constant_outage_scenarios(80.0, hours=2.0, n_steps=16,
                                     p_total=0.0)
    prob = PlanningProblem(scen, diesel_battery, PolicyConfig(),
                           solve_options=ref_opts())
    out = solve_problem(prob)
    assert out.cost.vom == 0.0
    assert out.cost.fuel == 0.0
    assert out.cost.startup == 0.0
    assert out.cost.emergency_purchase == 0.0
    assert out.cost.fixed_power > 0.0
    assert out.emissions.operating == 0.0


def test_demand_balance_residual(diesel_battery, rng):
    demands = [np.concatenate([rng.uniform(20, 90, size=10), np.zeros(6)])
               for _ in range(2)]
    scen = outage_scenarios(demands)
    prob = PlanningProblem(scen, diesel_battery, PolicyConfig(),
                           solve_options=ref_opts())
    out = solve_problem(prob)
    peak = scen.peak_demand_kw
    for p, period in enumerate(scen.periods):
        supply = sum(out.dispatch.generation[n][p]
                     for n in diesel_battery.fuel_techs)
        supply = supply + sum(out.dispatch.discharge[n][p]
                              - out.dispatch.charge[n][p]
                              for n in diesel_battery.batteries)
        assert np.abs(supply - period.demand_kw).max() <= 1e-6 * peak


def test_battery_starts_full_and_respects_soc(diesel_battery):
    demand = np.concatenate([np.full(8, 60.0), np.zeros(8)])
    scen = single_period_scenarios(demand)
    prob = PlanningProblem(scen, diesel_battery, PolicyConfig(),
                           solve_options=ref_opts())
    out = solve_problem(prob)
    bd = out.design.batteries["ironair"]
    soc = out.dispatch.soc["ironair"][0]
    assert np.all(soc <= bd.total_energy_kwh + 1e-6)
    assert validate_dispatch(out.design, out.dispatch, scen, diesel_battery,
                             PolicyConfig()) == []


def test_flexibility_conserves_energy(diesel_only, rng):
    demand = np.concatenate([rng.uniform(50, 150, size=16), np.zeros(8)])
    scen = single_period_scenarios(demand)
    pol = PolicyConfig(flexibility=FlexibilityPolicy(power_fraction=0.5,
                                                     temporal_hours=1.0))
    prob = PlanningProblem(scen, diesel_only, pol, solve_options=ref_opts())
    out = solve_problem(prob)
    si, so = out.dispatch.shift_in[0], out.dispatch.shift_out[0]
    assert si.sum() == pytest.approx(so.sum(), rel=1e-7)
    assert np.all(so <= 0.5 * scen.periods[0].demand_kw + 1e-7)
    # nothing may be dumped past restoration
    assert np.all(si[16:] <= 1e-9)
    served = scen.periods[0].demand_kw - so + si
    assert served.sum() == pytest.approx(scen.periods[0].demand_kw.sum(),
                                         rel=1e-9)
    assert validate_dispatch(out.design, out.dispatch, scen, diesel_only,
                             pol) == []
    # flexibility can only help
    base = solve_problem(PlanningProblem(scen, diesel_only, PolicyConfig(),
                                         solve_options=ref_opts()))
    assert out.objective <= base.objective + 1e-9


def test_flexibility_window_is_enforced(diesel_only):
    # demand spike at step 0 with a 0.5 h window: it cannot be pushed
    # more than two steps away
    demand = np.array([200.0, 10, 10, 10, 10, 10, 10, 10.0])
    scen = single_period_scenarios(demand)
    pol = PolicyConfig(flexibility=FlexibilityPolicy(power_fraction=1.0,
                                                     temporal_hours=0.5))
    out = solve_problem(PlanningProblem(scen, diesel_only, pol,
                                        solve_options=ref_opts()))
    served = (scen.periods[0].demand_kw - out.dispatch.shift_out[0]
              + out.dispatch.shift_in[0])
    # the spike energy must still be served within steps 0..2
    assert served[:3].sum() * 0.25 >= 200.0 * 0.25 - 1e-6


def test_relaxation_monotonicity_suite(diesel_battery, rng):
    demand = np.concatenate([rng.uniform(40, 140, size=24), np.zeros(8)])
    scen = single_period_scenarios(demand)

    def cost(policy):
        out = solve_problem(PlanningProblem(scen, diesel_battery, policy,
                                            solve_options=ref_opts()))
        assert out.optimal, out.status
        return out.objective

    base = cost(PolicyConfig())
    with_purchase = cost(PolicyConfig(
        emergency_purchase=EmergencyPurchasePolicy(interval_hours=2.0,
                                                   premium=0.43)))
    shorter_interval = cost(PolicyConfig(
        emergency_purchase=EmergencyPurchasePolicy(interval_hours=1.0,
                                                   premium=0.43)))
    assert with_purchase <= base + 1e-7
    assert shorter_interval <= with_purchase + 1e-7

    small_cap = cost(PolicyConfig(
        emergency_purchase=EmergencyPurchasePolicy(interval_hours=1.0,
                                                   premium=0.43,
                                                   max_per_event_kwh=20.0)))
    assert shorter_interval <= small_cap + 1e-7

    f1 = cost(PolicyConfig(flexibility=FlexibilityPolicy(0.2, 1.0)))
    f2 = cost(PolicyConfig(flexibility=FlexibilityPolicy(0.4, 1.0)))
    f3 = cost(PolicyConfig(flexibility=FlexibilityPolicy(0.4, 2.0)))
    assert f1 <= base + 1e-7
    assert f2 <= f1 + 1e-7
    assert f3 <= f2 + 1e-7


def test_emission_cap_row_matches_account(diesel_battery, rng):
    demand = np.concatenate([rng.uniform(40, 100, size=12), np.zeros(4)])
    scen = single_period_scenarios(demand)
    uncapped = solve_problem(PlanningProblem(scen, diesel_battery,
                                             PolicyConfig(),
                                             solve_options=ref_opts()))
    cap = 0.8 * uncapped.emissions.total()
    capped = solve_problem(PlanningProblem(scen, diesel_battery,
                                           PolicyConfig(co2_cap_kg=cap),
                                           solve_options=ref_opts()))
    assert capped.optimal
    assert capped.emissions.total() <= cap * (1 + 1e-7)
    assert capped.objective >= uncapped.objective - 1e-9


def test_truck_volume_limits_deliveries(diesel_only):
    demand = np.concatenate([np.full(8, 100.0), np.zeros(4)])
    scen = single_period_scenarios(demand)
    tech = diesel_only.fuel_techs["diesel"]
    pol = PolicyConfig(emergency_purchase=EmergencyPurchasePolicy(
        interval_hours=1.0, premium=0.43, truck_volume_liters=5.0))
    out = solve_problem(PlanningProblem(scen, diesel_only, pol,
                                        solve_options=ref_opts()))
    purchases = out.dispatch.fuel_purchase["diesel"][0]
    assert np.all(purchases / tech.volumetric_density <= 5.0 + 1e-9)


def test_existing_capacity_offsets_investment(diesel_only):
    scen = constant_outage_scenarios(100.0, hours=1.0, n_steps=8)
    greenfield = solve_problem(PlanningProblem(scen, diesel_only,
                                               PolicyConfig(),
                                               solve_options=ref_opts()))
    existing = {"diesel": {"power_kw": 100.0, "storage_kwh": 0.0}}
    brownfield_model = build(scen, diesel_only, PolicyConfig(),
                             existing=existing)
    res = solve(brownfield_model.lp, ref_opts())
    design, _ = extract(res, brownfield_model)
    assert design.fuel["diesel"].new_kw == pytest.approx(0.0, abs=1e-9)
    assert design.fuel["diesel"].total_kw == pytest.approx(100.0)
    assert res.objective < greenfield.objective  # invest charge avoided


def test_pinned_capacity(diesel_only):
    scen = constant_outage_scenarios(50.0, hours=1.0, n_steps=8)
    built = build(scen, diesel_only, PolicyConfig(),
                  pinned={"diesel": {"power_kw": 80.0, "storage_kwh": 300.0}})
    res = solve(built.lp, ref_opts())
    design, _ = extract(res, built)
    assert design.fuel["diesel"].total_kw == pytest.approx(80.0)
    assert design.fuel["diesel"].total_storage_kwh == pytest.approx(300.0)


def test_emission_terms_cover_all_categories(diesel_battery):
    scen = constant_outage_scenarios(60.0, hours=1.0, n_steps=8)
    built = build(scen, diesel_battery, PolicyConfig())
    terms = emission_terms(built.index, scen, diesel_battery)
    assert set(terms) == {"operating", "replacement", "charging_test",
                          "charging_recharge", "purchased"}
    assert terms["operating"]
    assert terms["replacement"]
    assert terms["charging_test"]


def test_lp_export_round_trip_same_optimum(tiny_problem, tmp_path):
    from bpsplan.lp import parse_lp_file, write_lp_file
    built = build(tiny_problem.scenarios, tiny_problem.catalog,
                  tiny_problem.policy)
    path = tmp_path / "bps.lp"
    write_lp_file(built.lp, path)
    lp2 = parse_lp_file(path)
    r1 = solve(built.lp, ref_opts())
    r2 = solve(lp2, ref_opts())
    assert r1.objective == pytest.approx(r2.objective, rel=1e-12)
