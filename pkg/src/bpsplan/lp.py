"""Sparse linear-program container, builder, and LP-format text I/O.

The canonical problem shape is

    minimize    c'x
    subject to  row_lb <= A x <= row_ub
                col_lb <=   x <= col_ub

with equalities expressed as row_lb == row_ub and one-sided rows carrying
an infinite bound.  The text writer emits a CPLEX-style LP file with 17
significant digits so coefficients survive a round trip bit-exactly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

INF = float("inf")


@dataclass
class LinearProgram:
    col_names: list[str]
    obj: np.ndarray
    col_lb: np.ndarray
    col_ub: np.ndarray
    row_names: list[str]
    a_matrix: sparse.csr_matrix
    row_lb: np.ndarray
    row_ub: np.ndarray
    _col_index: dict[str, int] = field(default=None, repr=False, compare=False)

    @property
    def n_cols(self) -> int:
        return len(self.col_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    def col_index(self, name: str) -> int:
        if self._col_index is None:
            self._col_index = {n: i for i, n in enumerate(self.col_names)}
        return self._col_index[name]

    def validate(self) -> None:
        if not np.all(np.isfinite(self.obj)):
            raise ValueError("non-finite objective coefficient")
        if not np.all(np.isfinite(self.a_matrix.data)):
            raise ValueError("non-finite constraint coefficient")
        if np.any(np.isnan(self.col_lb)) or np.any(np.isnan(self.col_ub)):
            raise ValueError("NaN in variable bounds")
        if np.any(np.isnan(self.row_lb)) or np.any(np.isnan(self.row_ub)):
            raise ValueError("NaN in row bounds")
        if np.any(self.col_lb > self.col_ub):
            bad = int(np.argmax(self.col_lb > self.col_ub))
            raise ValueError(f"crossed bounds on column {self.col_names[bad]}")
        if np.any(self.row_lb > self.row_ub):
            bad = int(np.argmax(self.row_lb > self.row_ub))
            raise ValueError(f"crossed bounds on row {self.row_names[bad]}")
        if self.a_matrix.shape != (self.n_rows, self.n_cols):
            raise ValueError("matrix shape does not match names")


class LpBuilder:
    """Incremental construction with O(1) appends; finalize() packs CSR."""

    def __init__(self):
        self.col_names: list[str] = []
        self.obj: list[float] = []
        self.col_lb: list[float] = []
        self.col_ub: list[float] = []
        self.row_names: list[str] = []
        self.row_lb: list[float] = []
        self.row_ub: list[float] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._name_to_col: dict[str, int] = {}

    def add_col(self, name: str, lb: float = 0.0, ub: float = INF,
                obj: float = 0.0) -> int:
        if name in self._name_to_col:
            raise ValueError(f"duplicate column {name}")
        idx = len(self.col_names)
        self._name_to_col[name] = idx
        self.col_names.append(name)
        self.obj.append(obj)
        self.col_lb.append(lb)
        self.col_ub.append(ub)
        return idx

    def add_cols(self, names, lb=0.0, ub=INF, obj=0.0) -> np.ndarray:
        """Vector append; scalar bounds/objective broadcast."""
        n = len(names)
        start = len(self.col_names)
        for i, name in enumerate(names):
            if name in self._name_to_col:
                raise ValueError(f"duplicate column {name}")
            self._name_to_col[name] = start + i
        self.col_names.extend(names)
        self.obj.extend(np.broadcast_to(obj, n).tolist())
        self.col_lb.extend(np.broadcast_to(lb, n).tolist())
        self.col_ub.extend(np.broadcast_to(ub, n).tolist())
        return np.arange(start, start + n)

    def add_obj(self, col: int, coeff: float) -> None:
        self.obj[col] += coeff

    def add_row(self, name: str, cols, vals, lb: float, ub: float) -> int:
        idx = len(self.row_names)
        self.row_names.append(name)
        self.row_lb.append(lb)
        self.row_ub.append(ub)
        self._rows.extend([idx] * len(cols))
        self._cols.extend(int(c) for c in cols)
        self._vals.extend(float(v) for v in vals)
        return idx

    def add_rows_batch(self, names, row_cols, row_vals, lb, ub) -> None:
        """Append many rows at once; ``row_cols[i]``/``row_vals[i]`` give the
        sparse pattern of row i, ``lb``/``ub`` broadcast."""
        n = len(names)
        lbs = np.broadcast_to(lb, n)
        ubs = np.broadcast_to(ub, n)
        for i in range(n):
            self.add_row(names[i], row_cols[i], row_vals[i], float(lbs[i]),
                         float(ubs[i]))

    def finalize(self) -> LinearProgram:
        n_rows, n_cols = len(self.row_names), len(self.col_names)
        a = sparse.coo_matrix(
            (np.asarray(self._vals, dtype=float),
             (np.asarray(self._rows, dtype=np.int64),
              np.asarray(self._cols, dtype=np.int64))),
            shape=(n_rows, n_cols),
        ).tocsr()
        a.sum_duplicates()
        lp = LinearProgram(
            col_names=self.col_names,
            obj=np.asarray(self.obj, dtype=float),
            col_lb=np.asarray(self.col_lb, dtype=float),
            col_ub=np.asarray(self.col_ub, dtype=float),
            row_names=self.row_names,
            a_matrix=a,
            row_lb=np.asarray(self.row_lb, dtype=float),
            row_ub=np.asarray(self.row_ub, dtype=float),
        )
        lp.validate()
        return lp


_NUM = "%.17g"
_NAME_RE = re.compile(r"[^A-Za-z0-9_.]")


def sanitize_name(name: str) -> str:
    out = _NAME_RE.sub("_", name)
    if out and out[0].isdigit():
        out = "n" + out
    return out or "x"


def _terms(names, cols, vals) -> str:
    parts = []
    for c, v in zip(cols, vals):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_NUM % abs(v)} {names[c]}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def write_lp_text(lp: LinearProgram) -> str:
    """CPLEX-style LP text.  Two-sided rows are split into _lo/_up pairs
    because the format has no native range syntax."""
    names = [sanitize_name(n) for n in lp.col_names]
    if len(set(names)) != len(names):  # fall back to positional names
        names = [f"x{i}" for i in range(lp.n_cols)]
    lines = ["\\ generated by bpsplan", "Minimize"]
    nz = np.nonzero(lp.obj)[0]
    lines.append(" obj: " + (_terms(names, nz, lp.obj[nz]) if len(nz) else "0 " + (names[0] if names else "x0")))
    lines.append("Subject To")
    a = lp.a_matrix.tocsr()
    for i in range(lp.n_rows):
        cols = a.indices[a.indptr[i]:a.indptr[i + 1]]
        vals = a.data[a.indptr[i]:a.indptr[i + 1]]
        rname = sanitize_name(lp.row_names[i]) or f"r{i}"
        rname = f"r{i}_{rname}"
        body = _terms(names, cols, vals) if len(cols) else f"0 {names[0]}"
        lb, ub = lp.row_lb[i], lp.row_ub[i]
        if lb == ub:
            lines.append(f" {rname}: {body} = {_NUM % lb}")
        else:
            if ub < INF:
                lines.append(f" {rname}_up: {body} <= {_NUM % ub}")
            if lb > -INF:
                lines.append(f" {rname}_lo: {body} >= {_NUM % lb}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lb, ub = lp.col_lb[j], lp.col_ub[j]
        if lb == ub:
            lines.append(f" {name} = {_NUM % lb}")
        elif lb == -INF and ub == INF:
            lines.append(f" {name} free")
        elif lb == -INF:
            lines.append(f" -inf <= {name} <= {_NUM % ub}")
        elif ub == INF:
            lines.append(f" {name} >= {_NUM % lb}")
        else:
            lines.append(f" {_NUM % lb} <= {name} <= {_NUM % ub}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp_file(lp: LinearProgram, path) -> None:
    with open(path, "w") as fh:
        fh.write(write_lp_text(lp))


_TERM_RE = re.compile(r"([+-])?\s*([0-9.eE+-]+)?\s*([A-Za-z_][A-Za-z0-9_.]*)")


def _parse_expr(expr: str):
    cols, vals = [], []
    pos = 0
    expr = expr.strip()
    while pos < len(expr):
        m = _TERM_RE.match(expr, pos)
        if not m:
            raise ValueError(f"cannot parse LP expression near {expr[pos:pos+30]!r}")
        sign, num, name = m.groups()
        coeff = float(num) if num not in (None, "") else 1.0
        if sign == "-":
            coeff = -coeff
        cols.append(name)
        vals.append(coeff)
        pos = m.end()
        while pos < len(expr) and expr[pos] == " ":
            pos += 1
    return cols, vals


def parse_lp_text(text: str) -> LinearProgram:
    """Parse the subset of LP format produced by :func:`write_lp_text`."""
    section = None
    obj_expr = None
    rows = []  # (name, expr, sense, rhs)
    bound_lines = []
    for raw in text.splitlines():
        line = raw.split("\\")[0].strip()
        if not line:
            continue
        low = line.lower()
        if low in ("minimize", "maximize", "min", "max"):
            section = "obj"
            if low.startswith("max"):
                raise ValueError("only minimization is supported")
            continue
        if low in ("subject to", "st", "s.t."):
            section = "rows"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low == "end":
            break
        if section == "obj":
            body = line.split(":", 1)[1] if ":" in line else line
            obj_expr = (obj_expr + " " + body) if obj_expr else body
        elif section == "rows":
            name, body = (line.split(":", 1) + [""])[:2] if ":" in line else (None, line)
            m = re.search(r"(<=|>=|=)", body)
            if not m:
                raise ValueError(f"row without relation: {line}")
            sense = m.group(1)
            expr, rhs = body.split(sense, 1)
            rows.append((name.strip() if name else f"r{len(rows)}",
                         expr, sense, float(rhs)))
        elif section == "bounds":
            bound_lines.append(line)

    builder = LpBuilder()

    def col(name):
        if name in builder._name_to_col:
            return builder._name_to_col[name]
        return builder.add_col(name, lb=0.0, ub=INF)

    if obj_expr:
        for name, coeff in zip(*_parse_expr(obj_expr)):
            builder.add_obj(col(name), coeff)
    for rname, expr, sense, rhs in rows:
        names, vals = _parse_expr(expr)
        cols = [col(n) for n in names]
        lb = rhs if sense in (">=", "=") else -INF
        ub = rhs if sense in ("<=", "=") else INF
        builder.add_row(rname, cols, vals, lb, ub)
    for line in bound_lines:
        if line.lower().endswith(" free"):
            j = col(line[:-5].strip())
            builder.col_lb[j], builder.col_ub[j] = -INF, INF
            continue
        parts = re.split(r"(<=|>=|=)", line)
        parts = [p.strip() for p in parts]
        if len(parts) == 5 and parts[1] == "<=" and parts[3] == "<=":
            j = col(parts[2])
            builder.col_lb[j] = -INF if parts[0] == "-inf" else float(parts[0])
            builder.col_ub[j] = float(parts[4])
        elif len(parts) == 3:
            lhs, op, rhs = parts
            try:
                j, val, var_on_left = col(lhs), float(rhs), True
            except ValueError:
                j, val, var_on_left = col(rhs), float(lhs), False
            if op == "=":
                builder.col_lb[j] = builder.col_ub[j] = val
            elif (op == ">=") == var_on_left:
                builder.col_lb[j] = val
            else:
                builder.col_ub[j] = val
        else:
            raise ValueError(f"cannot parse bound line: {line}")
    return builder.finalize()


def parse_lp_file(path) -> LinearProgram:
    with open(path) as fh:
        return parse_lp_text(fh.read())
