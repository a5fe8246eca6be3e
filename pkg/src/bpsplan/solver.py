"""Linear-program solvers with audit-friendly certificates.

Two backends sit behind one interface:

* ``reference`` -- a bounded-variable revised simplex (Dantzig pricing,
  Bland fallback after stall detection, composite phase 1).  Intended for
  desk-scale problems where every certificate can be recomputed cheaply.
* ``highs`` -- scipy's HiGHS wrapper for large deterministic-equivalent
  programs, with Farkas/ray certificates recovered by auxiliary solves.

``auto`` picks the reference solver below a size threshold and HiGHS above
it.  All backends report row duals in the same convention: ``y_r > 0``
means the row's lower bound is active, ``y_r < 0`` the upper bound, and the
dual objective is ``sum(y+ * row_lb + y- * row_ub) + sum(d+ * col_lb +
d- * col_ub)`` with ``d = c - A'y``.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .lp import INF, LinearProgram

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

_AUTO_REFERENCE_LIMIT = 1500  # rows + cols above this go to HiGHS

# nonbasic/basic state codes
_AT_LB, _AT_UB, _BASIC, _FREE = 0, 1, 2, 3


class SolverError(RuntimeError):
    pass


@dataclass
class SolveOptions:
    tol: float = 1e-9
    max_iter: int | None = None
    scaling: bool = True
    backend: str = "auto"  # reference | highs | auto
    log_path: str | None = None
    refactor_every: int = 80


@dataclass
class SolverResult:
    status: str
    objective: float | None
    x: np.ndarray | None
    y: np.ndarray | None
    reduced_costs: np.ndarray | None
    iterations: int
    solve_seconds: float
    backend: str
    ray: np.ndarray | None = None  # dual ray (infeasible) / primal ray (unbounded)
    log: list[dict] = field(default_factory=list)

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            for entry in self.log:
                fh.write(json.dumps(entry) + "\n")


@dataclass
class CertificateReport:
    ok: bool
    status: str
    max_primal_residual: float = 0.0
    max_dual_residual: float = 0.0
    duality_gap: float = 0.0
    violations: list[str] = field(default_factory=list)

    def raise_on_failure(self) -> None:
        if not self.ok:
            raise SolverError("certificate check failed: "
                              + "; ".join(self.violations[:5]))


def solve(lp: LinearProgram, opts: SolveOptions | None = None) -> SolverResult:
    """Solve to proven optimality, or return an infeasibility/unboundedness
    certificate."""
    opts = opts or SolveOptions()
    lp.validate()
    if lp.n_cols == 0:
        raise SolverError("LP has no columns")
    backend = opts.backend
    if backend == "auto":
        backend = ("reference"
                   if lp.n_rows + lp.n_cols <= _AUTO_REFERENCE_LIMIT
                   else "highs")
    t0 = time.perf_counter()
    if backend == "reference":
        result = _solve_reference(lp, opts)
    elif backend == "highs":
        result = _solve_highs(lp, opts)
    else:
        raise SolverError(f"unknown backend {backend!r}")
    result.solve_seconds = time.perf_counter() - t0
    result.backend = backend
    if opts.log_path:
        result.write_log(opts.log_path)
    return result


# ---------------------------------------------------------------------------
# reference revised simplex
# ---------------------------------------------------------------------------

class _Simplex:
    """Bounded-variable revised simplex on the equality form
    [A | -I] z = 0 with slacks carrying the row bounds."""

    def __init__(self, lp: LinearProgram, opts: SolveOptions):
        self.opts = opts
        self.m = lp.n_rows
        self.n = lp.n_cols
        a = lp.a_matrix.tocsc().astype(float)
        self.a_full = sparse.hstack(
            [a, -sparse.identity(self.m, format="csc")], format="csc"
        )
        self.c_full = np.concatenate([lp.obj, np.zeros(self.m)])
        self.lb = np.concatenate([lp.col_lb, lp.row_lb])
        self.ub = np.concatenate([lp.col_ub, lp.row_ub])
        self.n_total = self.n + self.m

        self.state = np.full(self.n_total, _AT_LB, dtype=np.int8)
        self.x = np.zeros(self.n_total)
        for j in range(self.n_total):
            if self.lb[j] > -INF:
                self.x[j], self.state[j] = self.lb[j], _AT_LB
            elif self.ub[j] < INF:
                self.x[j], self.state[j] = self.ub[j], _AT_UB
            else:
                self.x[j], self.state[j] = 0.0, _FREE
        self.basis = np.arange(self.n, self.n_total)
        self.state[self.basis] = _BASIC
        self.b_inv = -np.eye(self.m)
        self._set_basics_from_nonbasics()

        self.iterations = 0
        self.pivots_since_refactor = 0
        self.stall = 0
        self.bland = False
        self.log: list[dict] = []
        self.feas_tol = max(opts.tol, 1e-11)

    # -- linear algebra helpers --------------------------------------------

    def _set_basics_from_nonbasics(self) -> None:
        xm = self.x.copy()
        xm[self.basis] = 0.0
        rhs = -(self.a_full @ xm)
        self.x[self.basis] = self.b_inv @ rhs

    def _refactor(self) -> None:
        b = self.a_full[:, self.basis].toarray()
        try:
            self.b_inv = np.linalg.inv(b)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise SolverError("singular basis during refactorization") from exc
        self.pivots_since_refactor = 0
        self._set_basics_from_nonbasics()

    def _column(self, j: int) -> np.ndarray:
        return self.a_full[:, [j]].toarray().ravel()

    # -- pricing ------------------------------------------------------------

    def _price(self, cost_b: np.ndarray) -> np.ndarray:
        y = self.b_inv.T @ cost_b
        return self.a_full.T @ y  # q_j = y' * col_j for every column

    def _entering(self, d: np.ndarray, tol: float):
        """Pick entering column and direction (+1 increase / -1 decrease)."""
        up_ok = ((self.state == _AT_LB) | (self.state == _FREE)) & (d < -tol)
        dn_ok = ((self.state == _AT_UB) | (self.state == _FREE)) & (d > tol)
        fixed = self.lb == self.ub
        up_ok &= ~fixed
        dn_ok &= ~fixed
        if not (up_ok.any() or dn_ok.any()):
            return None, 0
        if self.bland:
            cand_up = np.nonzero(up_ok)[0]
            cand_dn = np.nonzero(dn_ok)[0]
            j_up = cand_up[0] if len(cand_up) else self.n_total
            j_dn = cand_dn[0] if len(cand_dn) else self.n_total
            return (int(j_up), +1) if j_up <= j_dn else (int(j_dn), -1)
        score = np.where(up_ok, -d, 0.0) + np.where(dn_ok, d, 0.0)
        j = int(np.argmax(score))
        return j, (+1 if up_ok[j] else -1)

    # -- ratio tests ---------------------------------------------------------

    def _ratio_phase2(self, j: int, direction: int, w: np.ndarray):
        """Blocking step keeping all basics inside their bounds."""
        rate = -w * direction  # movement of basics per unit step
        xb = self.x[self.basis]
        lb_b, ub_b = self.lb[self.basis], self.ub[self.basis]
        best_t, best_i, best_piv = INF, -1, 0.0
        for i in np.nonzero(np.abs(rate) > 1e-11)[0]:
            r = rate[i]
            target = ub_b[i] if r > 0 else lb_b[i]
            if abs(target) == INF:
                continue
            t = (target - xb[i]) / r
            t = max(t, 0.0)
            if t < best_t - 1e-12 or (t < best_t + 1e-12 and abs(w[i]) > abs(best_piv)):
                best_t, best_i, best_piv = t, i, w[i]
        own = self.ub[j] - self.lb[j]
        if own < best_t:
            return own, -1  # bound flip
        if best_i < 0:
            return INF, -2  # unbounded direction
        return best_t, best_i

    def _ratio_phase1(self, j: int, direction: int, w: np.ndarray):
        """Blocking step at the first feasibility-state transition."""
        rate = -w * direction
        xb = self.x[self.basis]
        lb_b, ub_b = self.lb[self.basis], self.ub[self.basis]
        ft = self.feas_tol
        best_t, best_i, best_piv = INF, -1, 0.0
        for i in np.nonzero(np.abs(rate) > 1e-11)[0]:
            r = rate[i]
            if xb[i] < lb_b[i] - ft:
                target = lb_b[i] if r > 0 else -INF
            elif xb[i] > ub_b[i] + ft:
                target = ub_b[i] if r < 0 else INF
            else:
                target = ub_b[i] if r > 0 else lb_b[i]
            if abs(target) == INF:
                continue
            t = max((target - xb[i]) / r, 0.0)
            if t < best_t - 1e-12 or (t < best_t + 1e-12 and abs(w[i]) > abs(best_piv)):
                best_t, best_i, best_piv = t, i, w[i]
        own = self.ub[j] - self.lb[j]
        if own < best_t:
            return own, -1
        if best_i < 0:
            return INF, -2
        return best_t, best_i

    # -- pivoting -------------------------------------------------------------

    def _apply_step(self, j: int, direction: int, w: np.ndarray, t: float,
                    leave_pos: int) -> None:
        if t > 0:
            self.x[j] += direction * t
            self.x[self.basis] += (-w * direction) * t
        if leave_pos == -1:  # bound flip, no basis change
            self.state[j] = _AT_UB if direction > 0 else _AT_LB
            self.x[j] = self.ub[j] if direction > 0 else self.lb[j]
            return
        leave = self.basis[leave_pos]
        xl = self.x[leave]
        snap_lb = (self.lb[leave] > -INF
                   and abs(xl - self.lb[leave]) <= abs(xl - self.ub[leave]))
        self.state[leave] = _AT_LB if snap_lb else _AT_UB
        self.x[leave] = self.lb[leave] if snap_lb else self.ub[leave]
        self.basis[leave_pos] = j
        self.state[j] = _BASIC
        # eta update of the explicit inverse
        piv = w[leave_pos]
        if abs(piv) < 1e-12:
            raise SolverError("numerically singular pivot")
        row = self.b_inv[leave_pos, :] / piv
        self.b_inv -= np.outer(w, row)
        self.b_inv[leave_pos, :] = row
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= self.opts.refactor_every:
            self._refactor()

    def _note_progress(self, t: float) -> None:
        if t <= 1e-12:
            self.stall += 1
            if self.stall > 30:
                self.bland = True
        else:
            self.stall = 0
            self.bland = False

    # -- phases ----------------------------------------------------------------

    def _infeasibility(self) -> tuple[np.ndarray, float]:
        xb = self.x[self.basis]
        lb_b, ub_b = self.lb[self.basis], self.ub[self.basis]
        gamma = np.zeros(self.m)
        gamma[xb < lb_b - self.feas_tol] = -1.0
        gamma[xb > ub_b + self.feas_tol] = 1.0
        total = float(np.sum(np.maximum(lb_b - xb, 0.0)
                             + np.maximum(xb - ub_b, 0.0)))
        return gamma, total

    def run(self, max_iter: int):
        # phase 1: drive the composite infeasibility to zero
        while self.iterations < max_iter:
            gamma, total = self._infeasibility()
            if total <= self.feas_tol * max(1.0, self.m):
                break
            cost_b = gamma
            q = self._price(cost_b)
            d = -q  # derivative of infeasibility wrt each nonbasic increase
            j, direction = self._entering(d, self.opts.tol)
            if j is None:
                y = self.b_inv.T @ gamma
                return INFEASIBLE, y
            w = self.b_inv @ self._column(j)
            t, leave_pos = self._ratio_phase1(j, direction, w)
            if leave_pos == -2:
                raise SolverError("phase 1 claims an unbounded improving ray")
            self._apply_step(j, direction, w, t, leave_pos)
            self._note_progress(t)
            self.iterations += 1
            if self.iterations % 50 == 0:
                self.log.append({"iter": self.iterations, "phase": 1,
                                 "infeasibility": total})
        else:
            return ITERATION_LIMIT, None

        # phase 2: optimize the true objective
        while self.iterations < max_iter:
            cost_b = self.c_full[self.basis]
            q = self._price(cost_b)
            d = self.c_full - q
            j, direction = self._entering(d, self.opts.tol)
            if j is None:
                return OPTIMAL, None
            w = self.b_inv @ self._column(j)
            t, leave_pos = self._ratio_phase2(j, direction, w)
            if leave_pos == -2:
                ray = np.zeros(self.n_total)
                ray[j] = direction
                ray[self.basis] = -w * direction
                return UNBOUNDED, ray
            self._apply_step(j, direction, w, t, leave_pos)
            self._note_progress(t)
            self.iterations += 1
            if self.iterations % 50 == 0:
                obj = float(self.c_full @ self.x)
                self.log.append({"iter": self.iterations, "phase": 2,
                                 "objective": obj})
        return ITERATION_LIMIT, None


def _equilibrate(lp: LinearProgram):
    """One pass of geometric-mean row/column scaling."""
    a = lp.a_matrix.tocsr()
    row_scale = np.ones(lp.n_rows)
    if a.nnz:
        for i in range(lp.n_rows):
            vals = np.abs(a.data[a.indptr[i]:a.indptr[i + 1]])
            if len(vals):
                row_scale[i] = 1.0 / np.sqrt(vals.max() * vals.min())
    a2 = sparse.diags(row_scale) @ a
    a2c = a2.tocsc()
    col_scale = np.ones(lp.n_cols)
    for j in range(lp.n_cols):
        vals = np.abs(a2c.data[a2c.indptr[j]:a2c.indptr[j + 1]])
        if len(vals):
            col_scale[j] = 1.0 / np.sqrt(vals.max() * vals.min())
    scaled = LinearProgram(
        col_names=lp.col_names,
        obj=lp.obj * col_scale,
        col_lb=np.where(np.isfinite(lp.col_lb), lp.col_lb / col_scale, lp.col_lb),
        col_ub=np.where(np.isfinite(lp.col_ub), lp.col_ub / col_scale, lp.col_ub),
        row_names=lp.row_names,
        a_matrix=(a2c @ sparse.diags(col_scale)).tocsr(),
        row_lb=np.where(np.isfinite(lp.row_lb), lp.row_lb * row_scale, lp.row_lb),
        row_ub=np.where(np.isfinite(lp.row_ub), lp.row_ub * row_scale, lp.row_ub),
    )
    return scaled, row_scale, col_scale


def _presolve_trivial(lp: LinearProgram):
    """Reject only what is cheap to see: an empty row whose bounds exclude
    zero is infeasible outright."""
    a = lp.a_matrix.tocsr()
    counts = np.diff(a.indptr)
    empty = np.nonzero(counts == 0)[0]
    for i in empty:
        if lp.row_lb[i] > 0 or lp.row_ub[i] < 0:
            y = np.zeros(lp.n_rows)
            y[i] = 1.0 if lp.row_lb[i] > 0 else -1.0
            return i, y
    return None, None


def _solve_reference(lp: LinearProgram, opts: SolveOptions) -> SolverResult:
    bad_row, farkas = _presolve_trivial(lp)
    if bad_row is not None:
        return SolverResult(INFEASIBLE, None, None, None, None, 0, 0.0,
                            "reference", ray=farkas,
                            log=[{"event": "empty-row infeasibility",
                                  "row": lp.row_names[bad_row]}])

    work_lp, row_scale, col_scale = (
        _equilibrate(lp) if opts.scaling else (lp, np.ones(lp.n_rows),
                                               np.ones(lp.n_cols))
    )
    sx = _Simplex(work_lp, opts)
    max_iter = opts.max_iter or (20 * (lp.n_rows + lp.n_cols) + 1000)
    status, extra = sx.run(max_iter)
    n = lp.n_cols

    if status == OPTIMAL:
        sx._refactor()  # clean the iterates before reporting certificates
        x = sx.x[:n] * col_scale
        y_scaled = sx.b_inv.T @ sx.c_full[sx.basis]
        y = y_scaled * row_scale
        d = lp.obj - lp.a_matrix.T @ y
        obj = float(lp.obj @ x)
        sx.log.append({"iter": sx.iterations, "phase": 2, "objective": obj,
                       "event": "optimal"})
        return SolverResult(OPTIMAL, obj, x, y, d, sx.iterations, 0.0,
                            "reference", log=sx.log)
    if status == INFEASIBLE:
        y = extra * row_scale
        sx.log.append({"iter": sx.iterations, "event": "infeasible"})
        return SolverResult(INFEASIBLE, None, None, None, None,
                            sx.iterations, 0.0, "reference", ray=y, log=sx.log)
    if status == UNBOUNDED:
        ray = extra[:n] * col_scale
        sx.log.append({"iter": sx.iterations, "event": "unbounded"})
        return SolverResult(UNBOUNDED, None, None, None, None,
                            sx.iterations, 0.0, "reference", ray=ray, log=sx.log)
    return SolverResult(ITERATION_LIMIT, None, None, None, None,
                        sx.iterations, 0.0, "reference", log=sx.log)


# ---------------------------------------------------------------------------
# HiGHS backend (scipy.optimize.linprog)
# ---------------------------------------------------------------------------

def _split_rows(lp: LinearProgram):
    eq = lp.row_lb == lp.row_ub
    up = (~eq) & np.isfinite(lp.row_ub)
    lo = (~eq) & np.isfinite(lp.row_lb)
    return eq, up, lo


def _solve_highs(lp: LinearProgram, opts: SolveOptions) -> SolverResult:
    eq, up, lo = _split_rows(lp)
    a = lp.a_matrix.tocsr()
    a_eq = a[eq] if eq.any() else None
    b_eq = lp.row_lb[eq] if eq.any() else None
    blocks, rhs = [], []
    if up.any():
        blocks.append(a[up])
        rhs.append(lp.row_ub[up])
    if lo.any():
        blocks.append(-a[lo])
        rhs.append(-lp.row_lb[lo])
    a_ub = sparse.vstack(blocks, format="csr") if blocks else None
    b_ub = np.concatenate(rhs) if rhs else None
    bounds = [
        (None if lb == -INF else lb, None if ub == INF else ub)
        for lb, ub in zip(lp.col_lb, lp.col_ub)
    ]
    res = linprog(lp.obj, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    log = [{"event": "highs", "status": int(res.status),
            "message": res.message.strip()}]
    iterations = int(getattr(res, "nit", 0) or 0)

    if res.status == 0:
        y = np.zeros(lp.n_rows)
        if eq.any():
            y[eq] = res.eqlin.marginals
        if up.any() or lo.any():
            marg = res.ineqlin.marginals
            n_up = int(up.sum())
            if up.any():
                y[up] += marg[:n_up]
            if lo.any():
                y[lo] += -marg[n_up:]
        d = lp.obj - lp.a_matrix.T @ y
        return SolverResult(OPTIMAL, float(res.fun), res.x, y, d, iterations,
                            0.0, "highs", log=log)
    if res.status == 2:
        farkas = _farkas_via_elastic(lp)
        return SolverResult(INFEASIBLE, None, None, None, None, iterations,
                            0.0, "highs", ray=farkas, log=log)
    if res.status == 3:
        ray = _ray_via_recession(lp)
        return SolverResult(UNBOUNDED, None, None, None, None, iterations,
                            0.0, "highs", ray=ray, log=log)
    if res.status == 1:
        return SolverResult(ITERATION_LIMIT, None, None, None, None,
                            iterations, 0.0, "highs", log=log)
    raise SolverError(f"HiGHS failed: {res.message}")


def _farkas_via_elastic(lp: LinearProgram) -> np.ndarray | None:
    """Row multipliers proving infeasibility, recovered from the duals of
    the elastic relaxation min sum(violations)."""
    m, n = lp.n_rows, lp.n_cols
    a = lp.a_matrix.tocsr()
    eye = sparse.identity(m, format="csr")
    a_el = sparse.hstack([a, eye, -eye], format="csr")
    elastic = LinearProgram(
        col_names=lp.col_names + [f"_p{i}" for i in range(m)]
        + [f"_q{i}" for i in range(m)],
        obj=np.concatenate([np.zeros(n), np.ones(2 * m)]),
        col_lb=np.concatenate([lp.col_lb, np.zeros(2 * m)]),
        col_ub=np.concatenate([lp.col_ub, np.full(2 * m, INF)]),
        row_names=lp.row_names,
        a_matrix=a_el,
        row_lb=lp.row_lb,
        row_ub=lp.row_ub,
    )
    res = _solve_highs(elastic, SolveOptions(backend="highs"))
    if res.status != OPTIMAL or res.objective <= 0:
        return None
    return res.y


def _ray_via_recession(lp: LinearProgram) -> np.ndarray | None:
    """A feasible direction of the recession cone with negative cost."""
    ray_lb = np.where(np.isfinite(lp.col_lb), 0.0, -1.0)
    ray_ub = np.where(np.isfinite(lp.col_ub), 0.0, 1.0)
    row_lo = np.where(np.isfinite(lp.row_lb), 0.0, -INF)
    row_hi = np.where(np.isfinite(lp.row_ub), 0.0, INF)
    cone = LinearProgram(
        col_names=lp.col_names,
        obj=lp.obj.copy(),
        col_lb=ray_lb,
        col_ub=ray_ub,
        row_names=lp.row_names,
        a_matrix=lp.a_matrix,
        row_lb=row_lo,
        row_ub=row_hi,
    )
    res = _solve_highs(cone, SolveOptions(backend="highs"))
    if res.status != OPTIMAL or res.objective >= 0:
        return None
    return res.x


# ---------------------------------------------------------------------------
# certificate checking
# ---------------------------------------------------------------------------

def _interval_violation(values, lb, ub):
    scale = 1.0 + np.maximum(np.abs(np.where(np.isfinite(lb), lb, 0.0)),
                             np.abs(np.where(np.isfinite(ub), ub, 0.0)))
    low = np.where(np.isfinite(lb), (lb - values) / scale, -INF)
    high = np.where(np.isfinite(ub), (values - ub) / scale, -INF)
    return np.maximum(low, high)


def check_certificates(lp: LinearProgram, result: SolverResult,
                       tol: float = 1e-7) -> CertificateReport:
    """Recompute every residual from scratch and fail loudly on violation."""
    if result.status == OPTIMAL:
        return _check_optimal(lp, result, tol)
    if result.status == INFEASIBLE:
        return _check_infeasible(lp, result, tol)
    if result.status == UNBOUNDED:
        return _check_unbounded(lp, result, tol)
    return CertificateReport(False, result.status,
                             violations=[f"no certificate for status "
                                         f"{result.status}"])


def _check_optimal(lp, result, tol):
    report = CertificateReport(True, OPTIMAL)
    x, y = result.x, result.y
    if x is None or y is None:
        return CertificateReport(False, OPTIMAL,
                                 violations=["missing primal or dual values"])
    ax = lp.a_matrix @ x
    row_viol = _interval_violation(ax, lp.row_lb, lp.row_ub)
    col_viol = _interval_violation(x, lp.col_lb, lp.col_ub)
    report.max_primal_residual = float(max(row_viol.max(initial=0.0),
                                           col_viol.max(initial=0.0), 0.0))
    if row_viol.max(initial=0.0) > tol:
        i = int(np.argmax(row_viol))
        report.ok = False
        report.violations.append(
            f"primal violation {row_viol[i]:.3e} on row {lp.row_names[i]}")
    if col_viol.max(initial=0.0) > tol:
        j = int(np.argmax(col_viol))
        report.ok = False
        report.violations.append(
            f"bound violation {col_viol[j]:.3e} on column {lp.col_names[j]}")

    d = lp.obj - lp.a_matrix.T @ y
    dual_viol = 0.0
    bad_mult = np.where(~np.isfinite(lp.row_lb), np.maximum(y, 0.0), 0.0) \
        + np.where(~np.isfinite(lp.row_ub), np.maximum(-y, 0.0), 0.0)
    if bad_mult.max(initial=0.0) > tol * max(1.0, float(np.abs(y).max(initial=0.0))):
        i = int(np.argmax(bad_mult))
        report.ok = False
        report.violations.append(
            f"dual multiplier on absent bound of row {lp.row_names[i]}")
    bad_d = np.where(~np.isfinite(lp.col_lb), np.maximum(d, 0.0), 0.0) \
        + np.where(~np.isfinite(lp.col_ub), np.maximum(-d, 0.0), 0.0)
    dscale = max(1.0, float(np.abs(lp.obj).max(initial=0.0)))
    if bad_d.max(initial=0.0) > tol * dscale:
        j = int(np.argmax(bad_d))
        report.ok = False
        report.violations.append(
            f"reduced cost on absent bound of column {lp.col_names[j]}")
    report.max_dual_residual = float(max(bad_mult.max(initial=0.0),
                                         bad_d.max(initial=0.0)))

    dual_obj = _dual_objective(lp, y, d)
    primal_obj = float(lp.obj @ x)
    gap = abs(primal_obj - dual_obj) / (1.0 + abs(primal_obj))
    report.duality_gap = float(gap)
    if gap > tol:
        report.ok = False
        report.violations.append(
            f"duality gap {gap:.3e} (primal {primal_obj:.9g}, "
            f"dual {dual_obj:.9g})")
    if result.objective is not None and \
       abs(result.objective - primal_obj) > tol * (1.0 + abs(primal_obj)):
        report.ok = False
        report.violations.append("reported objective does not match c'x")
    return report


def _dual_objective(lp, y, d) -> float:
    yp, ym = np.maximum(y, 0.0), np.minimum(y, 0.0)
    dp, dm = np.maximum(d, 0.0), np.minimum(d, 0.0)
    row_lb = np.where(np.isfinite(lp.row_lb), lp.row_lb, 0.0)
    row_ub = np.where(np.isfinite(lp.row_ub), lp.row_ub, 0.0)
    col_lb = np.where(np.isfinite(lp.col_lb), lp.col_lb, 0.0)
    col_ub = np.where(np.isfinite(lp.col_ub), lp.col_ub, 0.0)
    return float(yp @ row_lb + ym @ row_ub + dp @ col_lb + dm @ col_ub)


def _check_infeasible(lp, result, tol):
    y = result.ray
    if y is None:
        return CertificateReport(False, INFEASIBLE,
                                 violations=["missing Farkas certificate"])
    sigma = lp.a_matrix.T @ y
    a_max = float(np.abs(lp.a_matrix.data).max(initial=1.0)) if lp.a_matrix.nnz else 1.0
    eps = tol * (1.0 + float(np.abs(y).max(initial=0.0))) * (1.0 + a_max)
    # a valid y must not push against an absent bound
    bad_col = ((sigma > eps) & ~np.isfinite(lp.col_ub)) \
        | ((sigma < -eps) & ~np.isfinite(lp.col_lb))
    if bad_col.any():
        j = int(np.argmax(bad_col))
        return CertificateReport(
            False, INFEASIBLE,
            violations=[f"Farkas weight leans on absent bound of column "
                        f"{lp.col_names[j]}"])
    bad_row = ((y > eps) & ~np.isfinite(lp.row_lb)) \
        | ((y < -eps) & ~np.isfinite(lp.row_ub))
    if bad_row.any():
        i = int(np.argmax(bad_row))
        return CertificateReport(
            False, INFEASIBLE,
            violations=[f"Farkas weight leans on absent bound of row "
                        f"{lp.row_names[i]}"])
    # max of y'(Ax) over the box must fall short of what the rows require
    attain = float(
        np.sum(np.where((sigma > 0) & np.isfinite(lp.col_ub),
                        sigma * np.where(np.isfinite(lp.col_ub), lp.col_ub, 0.0),
                        0.0))
        + np.sum(np.where((sigma < 0) & np.isfinite(lp.col_lb),
                          sigma * np.where(np.isfinite(lp.col_lb), lp.col_lb, 0.0),
                          0.0))
    )
    required = float(
        np.sum(np.where((y > 0) & np.isfinite(lp.row_lb),
                        y * np.where(np.isfinite(lp.row_lb), lp.row_lb, 0.0),
                        0.0))
        + np.sum(np.where((y < 0) & np.isfinite(lp.row_ub),
                          y * np.where(np.isfinite(lp.row_ub), lp.row_ub, 0.0),
                          0.0))
    )
    margin = required - attain
    scale = 1.0 + abs(required) + float(np.abs(y).max(initial=0.0))
    if margin <= tol * scale:
        return CertificateReport(False, INFEASIBLE, duality_gap=margin,
                                 violations=[f"Farkas margin {margin:.3e} "
                                             "not positive"])
    return CertificateReport(True, INFEASIBLE, duality_gap=float(margin))


def _check_unbounded(lp, result, tol):
    r = result.ray
    if r is None:
        return CertificateReport(False, UNBOUNDED,
                                 violations=["missing primal ray"])
    report = CertificateReport(True, UNBOUNDED)
    ar = lp.a_matrix @ r
    scale = max(1.0, float(np.abs(r).max(initial=0.0)))
    bad_rows = np.where(np.isfinite(lp.row_lb), np.maximum(-ar, 0.0), 0.0) \
        + np.where(np.isfinite(lp.row_ub), np.maximum(ar, 0.0), 0.0)
    if bad_rows.max(initial=0.0) > tol * scale:
        i = int(np.argmax(bad_rows))
        report.ok = False
        report.violations.append(f"ray leaves row {lp.row_names[i]} bounds")
    bad_cols = np.where(np.isfinite(lp.col_lb), np.maximum(-r, 0.0), 0.0) \
        + np.where(np.isfinite(lp.col_ub), np.maximum(r, 0.0), 0.0)
    if bad_cols.max(initial=0.0) > tol * scale:
        j = int(np.argmax(bad_cols))
        report.ok = False
        report.violations.append(f"ray leaves column {lp.col_names[j]} bounds")
    descent = float(lp.obj @ r)
    if descent >= -tol * max(1.0, float(np.abs(lp.obj).max(initial=0.0))):
        report.ok = False
        report.violations.append(f"ray is not a descent direction "
                                 f"(c'r = {descent:.3e})")
    return report
