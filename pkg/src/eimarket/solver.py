"""Backend-agnostic LP/MILP layer.

Models are assembled row by row (or in vectorised blocks) into a sparse
matrix and handed to one of two HiGHS front ends: ``scipy.optimize`` (always
available) or ``highspy`` (optional).  The default backend is read from the
``EIMARKET_SOLVER`` environment variable; without it ``highspy`` is used
when installed and ``scipy`` otherwise.

Dual sign convention
--------------------
Every multiplier reported in :attr:`Solution.duals` and
:attr:`Solution.bound_duals` is the Lagrange multiplier of the constraint in
the orientation that makes it non-negative at an optimum: a binding ``<=`` row
of a minimisation (or ``>=`` row of a maximisation) has multiplier
``-d(obj)/d(rhs) >= 0``, the opposite orientation has ``+d(obj)/d(rhs) >= 0``.
Equality rows carry ``d(obj)/d(rhs)`` unchanged, so the power-balance row of a
cost-minimising dispatch reports the marginal price.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

INF = np.inf
BACKENDS = ("scipy", "highs")


class SolverConfigError(RuntimeError):
    """Requested backend cannot be used in this environment."""


class ModelError(ValueError):
    """Model is malformed (unknown variable, bad sense, ...)."""


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    GAP_REACHED = "gap_reached"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    ERROR = "error"

    @property
    def ok(self) -> bool:
        return self in (Status.OPTIMAL, Status.GAP_REACHED)


_SENSES = {"<=": "L", ">=": "G", "==": "E", "=": "E", "L": "L", "G": "G", "E": "E"}
_KINDS = ("continuous", "binary", "integer")


class Model:
    """Sparse linear model under construction.

    Variables and constraints are referred to by integer index; names are kept
    for export and for name-based lookup on the solution.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._kind: list[np.ndarray] = []
        self.row_names: list[str] = []
        self._row_sense: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self.obj = np.zeros(0)
        self.obj_constant = 0.0
        self.sense = "min"
        self._cache = None

    # -- variables -----------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.row_names)

    def add_vars(self, names, lb=0.0, ub=INF, kind: str = "continuous") -> np.ndarray:
        """Add a block of variables; returns their indices (same shape as ``names``)."""
        names = np.asarray(names, dtype=object)
        shape = names.shape
        flat = [str(n) for n in names.ravel()]
        n = len(flat)
        if kind not in _KINDS:
            raise ModelError(f"unknown variable kind {kind!r}")
        lb = np.broadcast_to(np.asarray(lb, dtype=float), shape).ravel().copy()
        ub = np.broadcast_to(np.asarray(ub, dtype=float), shape).ravel().copy()
        if kind == "binary":
            lb = np.maximum(lb, 0.0)
            ub = np.minimum(ub, 1.0)
        if np.any(np.isnan(lb)) or np.any(np.isnan(ub)) or np.any(lb > ub):
            raise ModelError("variable bounds must satisfy lb <= ub")
        start = self.num_vars
        self.var_names.extend(flat)
        self._lb.append(lb)
        self._ub.append(ub)
        self._kind.append(np.full(n, _KINDS.index(kind), dtype=np.int8))
        self._cache = None
        return np.arange(start, start + n).reshape(shape)

    def add_var(self, name: str, lb=0.0, ub=INF, kind: str = "continuous") -> int:
        return int(self.add_vars([name], lb, ub, kind)[0])

    # -- constraints ---------------------------------------------------
    def add_constr(self, coeffs: dict, sense: str, rhs: float, name: str) -> int:
        """Add ``sum(coef * x[var]) <sense> rhs`` where ``coeffs`` maps var index -> coef."""
        cols = np.fromiter(coeffs.keys(), dtype=np.int64, count=len(coeffs))
        vals = np.fromiter(coeffs.values(), dtype=float, count=len(coeffs))
        return int(self.add_rows(cols[None, :], vals[None, :], sense, [rhs], [name])[0])

    def add_rows(self, cols, vals, sense: str, rhs, names) -> np.ndarray:
        """Add ``m`` rows with ``k`` entries each.

        ``cols`` and ``vals`` are ``(m, k)`` arrays (``vals`` broadcasts);
        duplicate columns within a row are summed.
        """
        cols = np.atleast_2d(np.asarray(cols, dtype=np.int64))
        m, k = cols.shape
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (m, k))
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (m,)).copy()
        names = [str(n) for n in names]
        if len(names) != m:
            raise ModelError("one name per row required")
        if sense not in _SENSES:
            raise ModelError(f"unknown constraint sense {sense!r}")
        if m and (cols.min() < 0 or cols.max() >= self.num_vars):
            raise ModelError("constraint references an undeclared variable")
        if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(rhs)):
            raise ModelError("constraint coefficients must be finite")
        start = self.num_rows
        rows = np.repeat(np.arange(start, start + m), k)
        self._rows.append(rows)
        self._cols.append(cols.ravel())
        self._vals.append(vals.ravel().copy())
        self._row_sense.append(np.full(m, _SENSES[sense]))
        self._rhs.append(rhs)
        self.row_names.extend(names)
        self._cache = None
        return np.arange(start, start + m)

    def add_sparse_rows(self, rows_local, cols, vals, m: int, sense: str, rhs, names) -> np.ndarray:
        """Add ``m`` rows given in COO form with row indices local to the block."""
        rows_local = np.asarray(rows_local, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), cols.shape).copy()
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (m,)).copy()
        if len(names) != m:
            raise ModelError("one name per row required")
        if cols.size and (cols.min() < 0 or cols.max() >= self.num_vars):
            raise ModelError("constraint references an undeclared variable")
        start = self.num_rows
        self._rows.append(rows_local + start)
        self._cols.append(cols)
        self._vals.append(vals)
        self._row_sense.append(np.full(m, _SENSES[sense]))
        self._rhs.append(rhs)
        self.row_names.extend(str(n) for n in names)
        self._cache = None
        return np.arange(start, start + m)

    def set_objective(self, coeffs: dict | None = None, sense: str = "min", constant: float = 0.0,
                      cols=None, vals=None) -> None:
        if sense not in ("min", "max"):
            raise ModelError("objective sense must be 'min' or 'max'")
        c = np.zeros(self.num_vars)
        if coeffs:
            for j, v in coeffs.items():
                c[j] += v
        if cols is not None:
            np.add.at(c, np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float))
        self.obj = c
        self.sense = sense
        self.obj_constant = float(constant)

    # -- assembled views -----------------------------------------------
    def arrays(self):
        """Return ``(A csr, sense chars, rhs, lb, ub, kind, c)``."""
        if self._cache is None:
            n = self.num_vars
            m = self.num_rows
            if self._rows:
                rows = np.concatenate(self._rows)
                cols = np.concatenate(self._cols)
                vals = np.concatenate(self._vals)
            else:
                rows = cols = np.zeros(0, dtype=np.int64)
                vals = np.zeros(0)
            A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
            A.sum_duplicates()
            A.eliminate_zeros()
            sense = np.concatenate(self._row_sense) if self._row_sense else np.zeros(0, dtype="<U1")
            rhs = np.concatenate(self._rhs) if self._rhs else np.zeros(0)
            lb = np.concatenate(self._lb) if self._lb else np.zeros(0)
            ub = np.concatenate(self._ub) if self._ub else np.zeros(0)
            kind = np.concatenate(self._kind) if self._kind else np.zeros(0, dtype=np.int8)
            self._cache = (A, sense, rhs, lb, ub, kind)
        c = self.obj if len(self.obj) == self.num_vars else np.pad(self.obj, (0, self.num_vars - len(self.obj)))
        return (*self._cache, c)

    @property
    def is_mip(self) -> bool:
        return self.num_vars > 0 and bool(np.any(self.arrays()[5] > 0))

    def var_index(self, name: str) -> int:
        try:
            return self.var_names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def solve(self, gap: float = 1e-4, time_limit: float | None = None, backend: str | None = None) -> "Solution":
        return solve(self, gap=gap, time_limit=time_limit, backend=backend)


@dataclass
class Solution:
    status: Status
    objective_value: float
    primal: np.ndarray
    var_names: list[str]
    row_names: list[str]
    duals: np.ndarray | None = None
    bound_duals: tuple[np.ndarray, np.ndarray] | None = None
    gap: float = 0.0
    dual_objective: float | None = None
    backend: str = ""
    message: str = ""
    _vidx: dict = field(default=None, repr=False)
    _ridx: dict = field(default=None, repr=False)

    def value(self, var):
        if isinstance(var, str):
            if self._vidx is None:
                self._vidx = {n: i for i, n in enumerate(self.var_names)}
            var = self._vidx[var]
        return self.primal[var]

    def dual(self, row):
        if self.duals is None:
            raise ModelError("duals are only available for pure LPs")
        if isinstance(row, str):
            if self._ridx is None:
                self._ridx = {n: i for i, n in enumerate(self.row_names)}
            row = self._ridx[row]
        return self.duals[row]


def default_backend() -> str:
    """``EIMARKET_SOLVER`` if set, else ``highs`` when highspy is importable, else ``scipy``."""
    env = os.environ.get("EIMARKET_SOLVER", "").strip().lower()
    if env:
        return env
    try:
        import highspy  # noqa: F401
    except ImportError:
        return "scipy"
    return "highs"


def _require_backend(backend: str):
    if backend not in BACKENDS:
        raise SolverConfigError(f"unknown solver backend {backend!r}; choose one of {BACKENDS}")
    if backend == "highs":
        try:
            import highspy  # noqa: F401
        except ImportError as exc:
            raise SolverConfigError("solver backend 'highs' unavailable: the 'highspy' package is not installed") from exc


def solve(model: Model, gap: float = 1e-4, time_limit: float | None = None, backend: str | None = None) -> Solution:
    """Solve ``model``; LPs get duals, MILPs are solved to relative ``gap``."""
    backend = (backend or default_backend()).lower()
    _require_backend(backend)
    if backend == "highs":
        return _solve_highspy(model, gap, time_limit)
    return _solve_scipy(model, gap, time_limit)


def _orient(model: Model, sense_chars: np.ndarray, g_rows: np.ndarray, g_lo: np.ndarray, g_hi: np.ndarray):
    """Convert d(obj)/d(rhs) sensitivities into non-negative multipliers."""
    flip = 1.0 if model.sense == "min" else -1.0
    s = np.where(sense_chars == "G", 1.0, np.where(sense_chars == "L", -1.0, flip))
    duals = flip * s * g_rows
    return duals, (flip * g_lo, -flip * g_hi)


def _dual_objective(rhs, lb, ub, g_rows, g_lo, g_hi) -> float:
    lo = np.where(np.isfinite(lb), lb, 0.0)
    hi = np.where(np.isfinite(ub), ub, 0.0)
    return float(rhs @ g_rows + lo @ g_lo + hi @ g_hi)


def _solve_scipy(model: Model, gap: float, time_limit: float | None) -> Solution:
    A, sense, rhs, lb, ub, kind, c = model.arrays()
    sign = 1.0 if model.sense == "min" else -1.0
    n = model.num_vars
    if model.is_mip:
        row_lb = np.where(sense == "L", -INF, rhs)
        row_ub = np.where(sense == "G", INF, rhs)
        options = {"mip_rel_gap": gap, "disp": False}
        if time_limit is not None:
            options["time_limit"] = time_limit
        cons = [LinearConstraint(A, row_lb, row_ub)] if A.shape[0] else []
        res = milp(sign * c, integrality=(kind > 0).astype(int), bounds=Bounds(lb, ub),
                   constraints=cons, options=options)
        if res.status == 2:
            # the HiGHS build bundled with some scipy releases has presolve reductions that
            # wrongly report infeasibility on strong-duality models; confirm without presolve
            res = milp(sign * c, integrality=(kind > 0).astype(int), bounds=Bounds(lb, ub),
                       constraints=cons, options=dict(options, presolve=False))
        status = {0: Status.OPTIMAL, 1: Status.ITERATION_LIMIT, 2: Status.INFEASIBLE,
                  3: Status.UNBOUNDED}.get(res.status, Status.ERROR)
        x = res.x if res.x is not None else np.full(n, np.nan)
        if status == Status.ITERATION_LIMIT and res.x is not None:
            status = Status.ITERATION_LIMIT
        mip_gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
        if status == Status.OPTIMAL and mip_gap > 1e-9:
            status = Status.GAP_REACHED
        obj = float(c @ x) + model.obj_constant if res.x is not None else np.nan
        return Solution(status, obj, x, model.var_names, model.row_names, gap=mip_gap,
                        backend="scipy", message=str(res.message))

    is_ub = sense != "E"
    A_ub = A[is_ub]
    b_ub = rhs[is_ub].copy()
    neg = sense[is_ub] == "G"
    if neg.any():
        d = sp.diags(np.where(neg, -1.0, 1.0))
        A_ub = d @ A_ub
        b_ub = np.where(neg, -b_ub, b_ub)
    A_eq = A[~is_ub]
    b_eq = rhs[~is_ub]
    res = linprog(sign * c,
                  A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A_eq if A_eq.shape[0] else None, b_eq=b_eq if A_eq.shape[0] else None,
                  bounds=np.column_stack([lb, ub]) if n else None, method="highs",
                  options={"time_limit": time_limit} if time_limit else None)
    status = {0: Status.OPTIMAL, 1: Status.ITERATION_LIMIT, 2: Status.INFEASIBLE,
              3: Status.UNBOUNDED}.get(res.status, Status.ERROR)
    if res.x is None:
        return Solution(status, np.nan, np.full(n, np.nan), model.var_names, model.row_names,
                        backend="scipy", message=str(res.message))
    x = res.x
    # sensitivities of the *stated* objective w.r.t. each rhs / bound
    g_rows = np.zeros(model.num_rows)
    if A_ub.shape[0]:
        m_ub = sign * res.ineqlin.marginals
        g_rows[is_ub] = np.where(neg, -m_ub, m_ub)
    if A_eq.shape[0]:
        g_rows[~is_ub] = sign * res.eqlin.marginals
    g_lo = sign * res.lower.marginals
    g_hi = sign * res.upper.marginals
    duals, bduals = _orient(model, sense, g_rows, g_lo, g_hi)
    obj = float(c @ x) + model.obj_constant
    dual_obj = _dual_objective(rhs, lb, ub, g_rows, g_lo, g_hi) + model.obj_constant
    return Solution(status, obj, x, model.var_names, model.row_names, duals=duals, bound_duals=bduals,
                    dual_objective=dual_obj, backend="scipy", message=str(res.message))


def _solve_highspy(model: Model, gap: float, time_limit: float | None) -> Solution:
    import highspy

    A, sense, rhs, lb, ub, kind, c = model.arrays()
    n, m = model.num_vars, model.num_rows
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", float(gap))
    if time_limit is not None:
        h.setOptionValue("time_limit", float(time_limit))
    inf = h.getInfinity()
    lp = highspy.HighsLp()
    lp.num_col_ = n
    lp.num_row_ = m
    lp.col_cost_ = c.astype(float)
    lp.col_lower_ = np.where(np.isfinite(lb), lb, -inf)
    lp.col_upper_ = np.where(np.isfinite(ub), ub, inf)
    lp.row_lower_ = np.where(sense == "L", -inf, rhs)
    lp.row_upper_ = np.where(sense == "G", inf, rhs)
    csc = A.tocsc()
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = csc.indptr.astype(np.int32)
    lp.a_matrix_.index_ = csc.indices.astype(np.int32)
    lp.a_matrix_.value_ = csc.data.astype(float)
    lp.sense_ = highspy.ObjSense.kMinimize if model.sense == "min" else highspy.ObjSense.kMaximize
    mip = bool(np.any(kind > 0))
    if mip:
        lp.integrality_ = [highspy.HighsVarType.kInteger if k > 0 else highspy.HighsVarType.kContinuous
                           for k in kind]
    h.passModel(lp)
    h.run()
    ms = h.getModelStatus()
    MS = highspy.HighsModelStatus
    status = {MS.kOptimal: Status.OPTIMAL, MS.kInfeasible: Status.INFEASIBLE,
              MS.kUnbounded: Status.UNBOUNDED, MS.kUnboundedOrInfeasible: Status.INFEASIBLE,
              MS.kTimeLimit: Status.ITERATION_LIMIT, MS.kIterationLimit: Status.ITERATION_LIMIT,
              MS.kSolutionLimit: Status.ITERATION_LIMIT}.get(ms, Status.ERROR)
    sol = h.getSolution()
    info = h.getInfo()
    if not sol.value_valid:
        return Solution(status, np.nan, np.full(n, np.nan), model.var_names, model.row_names,
                        backend="highs", message=h.modelStatusToString(ms))
    x = np.asarray(sol.col_value, dtype=float)
    obj = float(c @ x) + model.obj_constant
    if mip:
        mip_gap = float(info.mip_gap) if np.isfinite(info.mip_gap) else 0.0
        if status == Status.OPTIMAL and mip_gap > 1e-9:
            status = Status.GAP_REACHED
        return Solution(status, obj, x, model.var_names, model.row_names, gap=mip_gap, backend="highs",
                        message=h.modelStatusToString(ms))
    g_rows = np.asarray(sol.row_dual, dtype=float)
    z = np.asarray(sol.col_dual, dtype=float)
    # HiGHS reports the reduced cost; attribute it to whichever bound it prices
    g_lo = np.where(z > 0, z, 0.0)
    g_hi = np.where(z < 0, z, 0.0)
    if model.sense == "max":
        g_lo, g_hi = np.where(z < 0, z, 0.0), np.where(z > 0, z, 0.0)
    duals, bduals = _orient(model, sense, g_rows, g_lo, g_hi)
    dual_obj = _dual_objective(rhs, lb, ub, g_rows, g_lo, g_hi) + model.obj_constant
    return Solution(status, obj, x, model.var_names, model.row_names, duals=duals, bound_duals=bduals,
                    dual_objective=dual_obj, backend="highs", message=h.modelStatusToString(ms))


# -- export ------------------------------------------------------------------
_LP_OK = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789!\"#$%&()/,.;?@_`'{}|~")


def _clean(name: str) -> str:
    out = "".join(ch if ch in _LP_OK else "_" for ch in name)
    if not out or out[0] in "0123456789.eE":
        out = "_" + out
    return out


def _unique_names(names: list[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for raw in names:
        nm = _clean(raw)
        if nm in seen:
            seen[nm] += 1
            nm = f"{nm}~{seen[nm]}"
        else:
            seen[nm] = 0
        out.append(nm)
    return out


def _num(v: float) -> str:
    return repr(float(v))


def export_model(model: Model, path, fmt: str = "mps") -> Path:
    """Write ``model`` as free MPS (``fmt='mps'``) or CPLEX LP text (``fmt='lp'``).

    Output is deterministic: the same model always produces the same bytes.
    """
    fmt = fmt.lower()
    if fmt not in ("mps", "lp"):
        raise ValueError(f"unsupported export format {fmt!r}; use 'mps' or 'lp'")
    path = Path(path)
    text = _to_mps(model) if fmt == "mps" else _to_lp(model)
    path.write_text(text)
    return path


def _to_mps(model: Model) -> str:
    A, sense, rhs, lb, ub, kind, c = model.arrays()
    vn = _unique_names(model.var_names)
    rn = _unique_names(model.row_names)
    out = [f"NAME {_clean(model.name)}"]
    if model.sense == "max":
        out += ["OBJSENSE", "    MAX"]
    out.append("ROWS")
    out.append(" N  obj")
    for name, s in zip(rn, sense):
        out.append(f" {s}  {name}")
    out.append("COLUMNS")
    csc = A.tocsc()
    in_int = False
    marker = 0
    for j in range(model.num_vars):
        is_int = kind[j] > 0
        if is_int and not in_int:
            out.append(f"    MARKER{marker} 'MARKER' 'INTORG'")
            in_int = True
        elif not is_int and in_int:
            out.append(f"    MARKER{marker} 'MARKER' 'INTEND'")
            marker += 1
            in_int = False
        entries = []
        if c[j] != 0:
            entries.append(("obj", c[j]))
        for p in range(csc.indptr[j], csc.indptr[j + 1]):
            entries.append((rn[csc.indices[p]], csc.data[p]))
        if not entries:
            entries.append(("obj", 0.0))
        for rname, v in entries:
            out.append(f"    {vn[j]} {rname} {_num(v)}")
    if in_int:
        out.append(f"    MARKER{marker} 'MARKER' 'INTEND'")
    out.append("RHS")
    for i in np.nonzero(rhs)[0]:
        out.append(f"    RHS {rn[i]} {_num(rhs[i])}")
    if model.obj_constant:
        out.append(f"    RHS obj {_num(-model.obj_constant)}")
    out.append("BOUNDS")
    for j in range(model.num_vars):
        lo, hi = lb[j], ub[j]
        if kind[j] == 1 and lo == 0 and hi == 1:
            out.append(f" BV BND {vn[j]}")
            continue
        if lo == -INF and hi == INF:
            out.append(f" FR BND {vn[j]}")
            continue
        if lo == hi:
            out.append(f" FX BND {vn[j]} {_num(lo)}")
            continue
        if lo == -INF:
            out.append(f" MI BND {vn[j]}")
        elif lo != 0:
            out.append(f" LO BND {vn[j]} {_num(lo)}")
        if hi != INF:
            out.append(f" UP BND {vn[j]} {_num(hi)}")
        elif kind[j] > 0:
            out.append(f" PL BND {vn[j]}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def _lp_terms(cols, vals, vn) -> str:
    parts = []
    for j, v in zip(cols, vals):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_num(abs(v))} {vn[j]}")
    if not parts:
        return "0 " + vn[0] if vn else "0"
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def _to_lp(model: Model) -> str:
    A, sense, rhs, lb, ub, kind, c = model.arrays()
    vn = _unique_names(model.var_names)
    rn = _unique_names(model.row_names)
    out = [f"\\ {_clean(model.name)}", "Maximize" if model.sense == "max" else "Minimize"]
    nz = np.nonzero(c)[0]
    obj = _lp_terms(nz, c[nz], vn)
    if model.obj_constant:
        obj += f" + {_num(model.obj_constant)}" if model.obj_constant > 0 else f" - {_num(-model.obj_constant)}"
    out.append(f" obj: {obj}")
    out.append("Subject To")
    csr = A.tocsr()
    op = {"L": "<=", "G": ">=", "E": "="}
    for i in range(model.num_rows):
        sl = slice(csr.indptr[i], csr.indptr[i + 1])
        out.append(f" {rn[i]}: {_lp_terms(csr.indices[sl], csr.data[sl], vn)} {op[sense[i]]} {_num(rhs[i])}")
    out.append("Bounds")
    for j in range(model.num_vars):
        lo, hi = lb[j], ub[j]
        if kind[j] == 1 and lo == 0 and hi == 1:
            continue
        if lo == -INF and hi == INF:
            out.append(f" {vn[j]} free")
        elif lo == hi:
            out.append(f" {vn[j]} = {_num(lo)}")
        else:
            los = "-inf" if lo == -INF else _num(lo)
            his = "+inf" if hi == INF else _num(hi)
            out.append(f" {los} <= {vn[j]} <= {his}")
    gen = [vn[j] for j in range(model.num_vars) if kind[j] == 2]
    binv = [vn[j] for j in range(model.num_vars) if kind[j] == 1]
    if gen:
        out.append("General")
        out.extend(f" {v}" for v in gen)
    if binv:
        out.append("Binary")
        out.extend(f" {v}" for v in binv)
    out.append("End")
    return "\n".join(out) + "\n"
