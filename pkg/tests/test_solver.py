import numpy as np
import pytest

from bpsplan.lp import INF, LpBuilder
from bpsplan.solver import (INFEASIBLE, OPTIMAL, UNBOUNDED, SolveOptions,
                            SolverError, check_certificates, solve)

from oracle_simplex import solve_general


def build_random_lp(rng, m, n):
    b = LpBuilder()
    for j in range(n):
        kind = rng.integers(0, 5)
        if kind == 0:
            lb, ub = 0.0, INF
        elif kind == 1:
            lb, ub = -float(rng.uniform(0, 5)), float(rng.uniform(0, 5))
        elif kind == 2:
            lb, ub = -INF, float(rng.uniform(0, 5))
        elif kind == 3:
            lb, ub = -INF, INF
        else:
            lb, ub = float(rng.uniform(0, 2)), float(rng.uniform(2, 6))
        b.add_col(f"x{j}", lb=lb, ub=ub, obj=float(rng.normal()))
    for i in range(m):
        cols = rng.choice(n, size=max(1, int(0.4 * n)), replace=False)
        vals = rng.normal(size=len(cols))
        kind = rng.integers(0, 3)
        mid = float(rng.normal())
        lo, up = {0: (mid, mid), 1: (-INF, mid), 2: (mid, INF)}[int(kind)]
        b.add_row(f"r{i}", cols.tolist(), vals.tolist(), lo, up)
    return b.finalize()


def test_trivial_min_x():
    b = LpBuilder()
    j = b.add_col("x", obj=1.0)
    b.add_row("r", [j], [1.0], 3.0, INF)
    lp = b.finalize()
    for backend in ("reference", "highs"):
        res = solve(lp, SolveOptions(backend=backend))
        assert res.status == OPTIMAL
        assert res.objective == pytest.approx(3.0, abs=1e-9)
        assert check_certificates(lp, res).ok


def test_trivial_unbounded():
    b = LpBuilder()
    j = b.add_col("x", obj=-1.0)
    b.add_row("r", [j], [1.0], 0.0, INF)
    lp = b.finalize()
    for backend in ("reference", "highs"):
        res = solve(lp, SolveOptions(backend=backend))
        assert res.status == UNBOUNDED
        assert check_certificates(lp, res).ok


def test_trivial_infeasible_with_farkas():
    b = LpBuilder()
    j = b.add_col("x", lb=0.0, ub=1.0, obj=1.0)
    b.add_row("r", [j], [1.0], 2.0, INF)
    lp = b.finalize()
    for backend in ("reference", "highs"):
        res = solve(lp, SolveOptions(backend=backend))
        assert res.status == INFEASIBLE
        assert res.ray is not None
        assert check_certificates(lp, res).ok


def test_random_lps_match_textbook_oracle(rng):
    statuses = {"optimal": 0, "infeasible": 0, "unbounded": 0}
    for _ in range(60):
        m = int(rng.integers(1, 20))
        n = int(rng.integers(1, 30))
        lp = build_random_lp(rng, m, n)
        res = solve(lp, SolveOptions(backend="reference"))
        oracle_status, oracle_obj = solve_general(lp)
        assert res.status == oracle_status
        statuses[res.status] += 1
        if res.status == OPTIMAL:
            assert res.objective == pytest.approx(
                oracle_obj, rel=1e-7, abs=1e-7)
            assert check_certificates(lp, res, tol=1e-7).ok
    assert statuses["optimal"] > 5  # the mix exercises every status
    assert statuses["infeasible"] > 5
    assert statuses["unbounded"] > 5


def test_perturbed_primal_fails_with_named_row():
    b = LpBuilder()
    x = b.add_col("x", obj=1.0)
    b.add_row("demand_row", [x], [1.0], 3.0, 3.0)
    lp = b.finalize()
    res = solve(lp, SolveOptions(backend="reference"))
    res.x = res.x + 1e-3
    report = check_certificates(lp, res)
    assert not report.ok
    assert any("demand_row" in v for v in report.violations)


def test_scaling_does_not_change_result(rng):
    for _ in range(10):
        lp = build_random_lp(rng, 12, 18)
        a = solve(lp, SolveOptions(backend="reference", scaling=True))
        b = solve(lp, SolveOptions(backend="reference", scaling=False))
        assert a.status == b.status
        if a.status == OPTIMAL:
            assert a.objective == pytest.approx(b.objective, rel=1e-9,
                                                abs=1e-9)


def test_deterministic_for_fixed_input(rng):
    lp = build_random_lp(rng, 15, 25)
    a = solve(lp, SolveOptions(backend="reference"))
    b = solve(lp, SolveOptions(backend="reference"))
    assert a.status == b.status
    if a.status == OPTIMAL:
        assert np.array_equal(a.x, b.x)
        assert a.iterations == b.iterations


def test_solve_log_jsonl(tmp_path, rng):
    lp = build_random_lp(rng, 30, 40)
    log_path = tmp_path / "solve.jsonl"
    res = solve(lp, SolveOptions(backend="reference",
                                 log_path=str(log_path)))
    import json
    lines = [json.loads(line) for line in log_path.read_text().splitlines()]
    assert lines, "log should not be empty"
    assert all("iter" in e or "event" in e for e in lines)
    assert res.backend == "reference"


def test_dimension_validation():
    b = LpBuilder()
    b.add_col("x", obj=1.0)
    lp = b.finalize()
    lp.obj = np.array([1.0, 2.0])  # deliberately inconsistent
    with pytest.raises(Exception):
        solve(lp, SolveOptions(backend="reference"))


def test_auto_backend_picks_reference_for_small():
    b = LpBuilder()
    j = b.add_col("x", obj=1.0)
    b.add_row("r", [j], [1.0], 1.0, INF)
    res = solve(b.finalize(), SolveOptions(backend="auto"))
    assert res.backend == "reference"


def test_empty_row_infeasibility_certificate():
    b = LpBuilder()
    b.add_col("x", obj=1.0)
    b.add_row("impossible", [], [], 1.0, INF)  # 0 >= 1
    lp = b.finalize()
    res = solve(lp, SolveOptions(backend="reference"))
    assert res.status == INFEASIBLE
    assert check_certificates(lp, res).ok
