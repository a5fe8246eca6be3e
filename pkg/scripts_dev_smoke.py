"""Dev smoke test for the reference simplex (deleted before delivery)."""
import numpy as np
from scipy.optimize import linprog

from bpsplan.lp import INF, LpBuilder
from bpsplan.solver import SolveOptions, solve, check_certificates


def build_random(rng, m, n):
    b = LpBuilder()
    for j in range(n):
        kind = rng.integers(0, 5)
        if kind == 0:
            lb, ub = 0.0, INF
        elif kind == 1:
            lb, ub = -rng.uniform(0, 5), rng.uniform(0, 5)
        elif kind == 2:
            lb, ub = -INF, rng.uniform(0, 5)
        elif kind == 3:
            lb, ub = -INF, INF
        else:
            lb, ub = rng.uniform(0, 2), rng.uniform(2, 6)
        b.add_col(f"x{j}", lb=lb, ub=ub, obj=float(rng.normal()))
    dens = 0.4
    for i in range(m):
        cols = rng.choice(n, size=max(1, int(dens * n)), replace=False)
        vals = rng.normal(size=len(cols))
        kind = rng.integers(0, 3)
        mid = float(rng.normal())
        if kind == 0:
            lo, up = mid, mid
        elif kind == 1:
            lo, up = -INF, mid
        else:
            lo, up = mid, INF
        b.add_row(f"r{i}", cols.tolist(), vals.tolist(), lo, up)
    return b.finalize()


def scipy_solve(lp):
    eq = lp.row_lb == lp.row_ub
    up = (~eq) & np.isfinite(lp.row_ub)
    lo = (~eq) & np.isfinite(lp.row_lb)
    a = lp.a_matrix.toarray()
    a_ub, b_ub = [], []
    if up.any():
        a_ub.append(a[up]); b_ub.append(lp.row_ub[up])
    if lo.any():
        a_ub.append(-a[lo]); b_ub.append(-lp.row_lb[lo])
    bounds = [(None if l == -INF else l, None if u == INF else u)
              for l, u in zip(lp.col_lb, lp.col_ub)]
    res = linprog(lp.obj,
                  A_ub=np.vstack(a_ub) if a_ub else None,
                  b_ub=np.concatenate(b_ub) if b_ub else None,
                  A_eq=a[eq] if eq.any() else None,
                  b_eq=lp.row_lb[eq] if eq.any() else None,
                  bounds=bounds, method="highs")
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status, "?")
    return status, (res.fun if res.status == 0 else None)


rng = np.random.default_rng(0)
mismatch = 0
counts = {}
for trial in range(150):
    m = int(rng.integers(1, 25))
    n = int(rng.integers(1, 35))
    lp = build_random(rng, m, n)
    ref = solve(lp, SolveOptions(backend="reference"))
    sp_status, sp_obj = scipy_solve(lp)
    counts[sp_status] = counts.get(sp_status, 0) + 1
    ok = ref.status == sp_status
    if ok and ref.status == "optimal":
        ok = abs(ref.objective - sp_obj) <= 1e-7 * (1 + abs(sp_obj))
        rep = check_certificates(lp, ref, tol=1e-7)
        if not rep.ok:
            print(f"trial {trial}: certificate FAIL {rep.violations}")
            mismatch += 1
            continue
    if ref.status == "infeasible":
        rep = check_certificates(lp, ref, tol=1e-7)
        if not rep.ok:
            print(f"trial {trial}: farkas FAIL {rep.violations}")
            mismatch += 1
            continue
    if ref.status == "unbounded" and ref.ray is not None:
        rep = check_certificates(lp, ref, tol=1e-7)
        if not rep.ok:
            print(f"trial {trial}: ray FAIL {rep.violations}")
            mismatch += 1
            continue
    if not ok:
        print(f"trial {trial}: m={m} n={n} ref={ref.status}/{ref.objective} "
              f"scipy={sp_status}/{sp_obj}")
        mismatch += 1

print("status counts (scipy):", counts)
print("mismatches:", mismatch)
