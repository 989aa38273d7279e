"""Linear programs solved to an optimal basic feasible (extreme-point) solution.

Two backends:

``tableau``
    A dense two-phase simplex written here. Dantzig pricing, switching to
    Bland's rule after ``10 * n_vars`` consecutive degenerate pivots.
``highs``
    HiGHS dual simplex through :func:`scipy.optimize.linprog`. Used for
    LPs too large for a dense tableau (LP1 on a few hundred points has
    ~n^2 columns). Dual simplex finishes on a basis, so the point is a vertex.

``auto`` picks the tableau for small problems.

All variables have lower bound 0 and no upper bound.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
SUPPORT_TOL = 1e-6
PIVOT_TOL = 1e-9
MAX_PIVOTS = 1_000_000
TABLEAU_MAX_CELLS = 400_000

_dump_dir: Path | None = None
_dump_count = 0


class LPError(RuntimeError):
    pass


class LPInfeasible(LPError):
    def __init__(self, msg="infeasible"):
        super().__init__(msg)


class LPUnbounded(LPError):
    def __init__(self, msg="unbounded"):
        super().__init__(msg)


class LPStalled(LPError):
    def __init__(self, msg="stalled"):
        super().__init__(msg)


SENSES = ("<=", "=", ">=")


class LinearProgram:
    """Minimize ``c @ x`` subject to sparse rows ``a @ x (<=|=|>=) b``, ``x >= 0``."""

    def __init__(self, name="lp"):
        self.name = name
        self.var_names: list[str] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.row_names: list[str] = []
        self._coo: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self._matrix = None
        self._cost: dict[int, float] = {}

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.senses)

    def add_variable(self, name: str) -> int:
        self.var_names.append(name)
        self._matrix = None
        return len(self.var_names) - 1

    def add_variables(self, count: int, prefix: str) -> np.ndarray:
        start = len(self.var_names)
        self.var_names.extend(f"{prefix}{i}" for i in range(count))
        self._matrix = None
        return np.arange(start, start + count)

    def minimize(self, coeffs: dict[int, float]) -> None:
        self._cost = {int(k): float(v) for k, v in coeffs.items()}

    def add_constraint(self, idx, coef, sense: str, rhs: float, name: str | None = None) -> int:
        idx = np.asarray(idx, dtype=int).ravel()
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape)
        self._append(np.zeros(idx.size, dtype=int), idx, coef, 1, [sense], [rhs],
                     [name] if name else None)
        return self.n_rows - 1

    def add_rows(self, A, sense: str, rhs, prefix: str | None = None) -> np.ndarray:
        """Append every row of sparse ``A`` with one shared relation."""
        A = sp.coo_matrix(A)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (A.shape[0],))
        start = self.n_rows
        names = [f"{prefix}{i}" for i in range(A.shape[0])] if prefix else None
        self._append(A.row, A.col, A.data, A.shape[0], [sense] * A.shape[0], rhs, names)
        return np.arange(start, self.n_rows)

    def _append(self, rows, cols, vals, nrows, senses, rhs, names):
        if any(s not in SENSES for s in senses):
            raise ValueError(f"bad relation in {set(senses)}")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_vars):
            raise ValueError("constraint references an undeclared variable")
        if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(rhs)):
            raise ValueError("coefficients must be finite")
        start = self.n_rows
        self._coo.append((np.asarray(rows) + start, np.asarray(cols, dtype=int),
                          np.asarray(vals, dtype=float)))
        self.senses.extend(senses)
        self.rhs.extend(float(b) for b in rhs)
        if names is None:
            names = [f"c{start + i}" for i in range(nrows)]
        self.row_names.extend(names)
        self._matrix = None

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for k, v in self._cost.items():
            c[k] = v
        return c

    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None or self._matrix.shape != (self.n_rows, self.n_vars):
            if self._coo:
                rows = np.concatenate([t[0] for t in self._coo])
                cols = np.concatenate([t[1] for t in self._coo])
                vals = np.concatenate([t[2] for t in self._coo])
            else:
                rows = cols = np.zeros(0, dtype=int)
                vals = np.zeros(0)
            self._matrix = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_rows, self.n_vars))
        return self._matrix

    def residuals(self, x) -> np.ndarray:
        """Constraint violations (>= 0, zero when satisfied)."""
        ax = self.matrix() @ x
        b = np.array(self.rhs)
        senses = np.array(self.senses)
        viol = np.zeros(len(b))
        le, ge, eq = senses == "<=", senses == ">=", senses == "="
        viol[le] = np.maximum(ax[le] - b[le], 0)
        viol[ge] = np.maximum(b[ge] - ax[ge], 0)
        viol[eq] = np.abs(ax[eq] - b[eq])
        return viol

    def to_lp_format(self) -> str:
        """CPLEX-style LP file text."""

        def terms(idx, coef):
            parts = []
            for i, a in zip(idx, coef):
                if a == 0:
                    continue
                sign = "-" if a < 0 else "+"
                parts.append(f"{sign} {abs(a):.17g} {self.var_names[i]}")
            if not parts:
                return "0 " + self.var_names[0]
            s = " ".join(parts)
            return s[2:] if s.startswith("+ ") else s

        out = [f"\\ {self.name}", "Minimize"]
        obj = sorted(self._cost.items())
        out.append(" obj: " + terms([k for k, _ in obj], [v for _, v in obj]))
        out.append("Subject To")
        A = self.matrix()
        for r, (sense, b, nm) in enumerate(zip(self.senses, self.rhs, self.row_names)):
            lo, hi = A.indptr[r], A.indptr[r + 1]
            out.append(f" {nm}: {terms(A.indices[lo:hi], A.data[lo:hi])} {sense} {b:.17g}")
        out.append("Bounds")
        for nm in self.var_names:
            out.append(f" {nm} >= 0")
        out.append("End")
        return "\n".join(out) + "\n"

    def write_lp(self, path) -> None:
        Path(path).write_text(self.to_lp_format())


@dataclass
class VertexSolution:
    values: np.ndarray
    objective_value: float
    support: tuple[int, ...]
    method: str
    pivots: int = 0
    max_violation: float = 0.0
    extra: dict = field(default_factory=dict)

    def __getitem__(self, idx):
        return self.values[idx]


def set_lp_dump(directory) -> None:
    """Write every LP solved from now on to ``directory`` (None disables)."""
    global _dump_dir, _dump_count
    _dump_dir = Path(directory) if directory is not None else None
    _dump_count = 0
    if _dump_dir is not None:
        _dump_dir.mkdir(parents=True, exist_ok=True)


def solve_to_vertex(lp: LinearProgram, method: str = "auto", check_vertex: bool = False,
                    max_pivots: int = MAX_PIVOTS) -> VertexSolution:
    """Solve ``lp`` to an optimal extreme point.

    Raises :class:`LPInfeasible`, :class:`LPUnbounded` or :class:`LPStalled`.
    With ``check_vertex`` the returned point is tested for basicness and
    purified if needed (the objective never gets worse).
    """
    global _dump_count
    if _dump_dir is not None:
        _dump_count += 1
        lp.write_lp(_dump_dir / f"{_dump_count:06d}_{lp.name}.lp")

    if method == "auto":
        cells = (lp.n_rows + 1) * (lp.n_vars + 2 * lp.n_rows + 1)
        method = "tableau" if cells <= TABLEAU_MAX_CELLS else "highs"
    c = lp.cost_vector()
    if method == "tableau":
        x, pivots = _tableau_simplex(lp, c, max_pivots)
    elif method == "highs":
        x, pivots = _highs(lp, c, max_pivots)
    else:
        raise ValueError(f"unknown method {method!r}")

    x = np.where(np.abs(x) < 1e-13, 0.0, x)
    if check_vertex and not is_vertex(lp, x):
        log.debug("purifying non-basic solution of %s", lp.name)
        x = purify(lp, x)
    viol = lp.residuals(x)
    max_viol = float(viol.max()) if viol.size else 0.0
    scale = 1.0 + float(np.max(np.abs(lp.rhs))) if lp.rhs else 1.0
    if max_viol > FEAS_TOL * scale:
        raise LPStalled(f"stalled: solution violates constraints by {max_viol:.3g}")
    support = tuple(int(i) for i in np.flatnonzero(x > SUPPORT_TOL))
    return VertexSolution(x, float(c @ x), support, method, pivots, max_viol)


# -- HiGHS --------------------------------------------------------------------

def _highs(lp: LinearProgram, c: np.ndarray, max_pivots: int):
    A = lp.matrix()
    senses = np.array(lp.senses)
    b = np.array(lp.rhs)
    le, ge, eq = senses == "<=", senses == ">=", senses == "="
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr() if (le.any() or ge.any()) else None
    b_ub = np.concatenate([b[le], -b[ge]]) if A_ub is not None else None
    A_eq = A[eq] if eq.any() else None
    b_eq = b[eq] if eq.any() else None
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs-ds", options={"maxiter": max_pivots})
    if res.status == 2:
        raise LPInfeasible()
    if res.status == 3:
        raise LPUnbounded()
    if res.status != 0:
        raise LPStalled(f"stalled: {res.message}")
    return np.asarray(res.x, dtype=float), int(getattr(res, "nit", 0))


# -- dense tableau simplex -----------------------------------------------------

def _tableau_simplex(lp: LinearProgram, c: np.ndarray, max_pivots: int):
    A = lp.matrix().toarray()
    b = np.array(lp.rhs, dtype=float)
    senses = list(lp.senses)
    m, n = A.shape

    # rows with negative rhs are flipped so that b >= 0
    for r in range(m):
        if b[r] < 0:
            A[r] *= -1
            b[r] *= -1
            senses[r] = {"<=": ">=", ">=": "<=", "=": "="}[senses[r]]

    n_slack = sum(s != "=" for s in senses)
    n_art = sum(s != "<=" for s in senses)
    ncol = n + n_slack + n_art
    T = np.zeros((m + 1, ncol + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    s_col, a_col = n, n + n_slack
    for r, s in enumerate(senses):
        if s == "<=":
            T[r, s_col] = 1.0
            basis[r] = s_col
            s_col += 1
        elif s == ">=":
            T[r, s_col] = -1.0
            s_col += 1
            T[r, a_col] = 1.0
            basis[r] = a_col
            a_col += 1
        else:
            T[r, a_col] = 1.0
            basis[r] = a_col
            a_col += 1
    art_start = n + n_slack

    pivots = 0
    if n_art:
        # phase 1: minimise the sum of artificials
        T[m, :] = 0.0
        T[m, art_start:ncol] = 1.0
        for r in range(m):
            if basis[r] >= art_start:
                T[m] -= T[r]
        pivots += _run_simplex(T, basis, ncol, max_pivots - pivots, n_struct=n)
        scale = 1.0 + float(np.abs(b).max(initial=0.0))
        if -T[m, -1] > FEAS_TOL * scale:
            raise LPInfeasible()
        # drive artificials out of the basis, dropping redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] < art_start:
                continue
            row = T[r, :art_start]
            cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
            if cand.size:
                e = cand[np.argmax(np.abs(row[cand]))]
                _pivot(T, basis, r, e)
                pivots += 1
            else:
                keep[r] = False
        if not keep.all():
            T = np.vstack([T[:m][keep], T[m:]])
            basis = basis[keep]
            m = len(basis)
        T = np.delete(T, np.s_[art_start:ncol], axis=1)
        ncol = art_start

    # phase 2
    cost = np.zeros(ncol)
    cost[:n] = c
    T[m, :] = 0.0
    T[m, :ncol] = cost
    for r in range(m):
        if cost[basis[r]] != 0:
            T[m] -= cost[basis[r]] * T[r]
    pivots += _run_simplex(T, basis, ncol, max_pivots - pivots, n_struct=n)

    x = np.zeros(ncol)
    x[basis] = T[:m, -1]
    return np.maximum(x[:n], 0.0), pivots


def _pivot(T, basis, r, e):
    T[r] /= T[r, e]
    col = T[:, e].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    T[:, e] = 0.0
    T[r, e] = 1.0
    basis[r] = e


def _run_simplex(T, basis, ncol, max_pivots, n_struct):
    m = T.shape[0] - 1
    pivots = 0
    degenerate_run = 0
    bland = False
    bland_after = 10 * max(n_struct, 1)
    while True:
        rc = T[m, :ncol]
        neg = np.flatnonzero(rc < -PIVOT_TOL)
        if neg.size == 0:
            return pivots
        if pivots >= max_pivots:
            raise LPStalled()
        if bland:
            e = int(neg[0])
        else:
            e = int(neg[np.argmin(rc[neg])])
        col = T[:m, e]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            raise LPUnbounded()
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * (1 + abs(best))]
        r = int(ties[np.argmin(basis[ties])])
        if T[r, -1] <= PIVOT_TOL:
            degenerate_run += 1
            if degenerate_run >= bland_after:
                bland = True
        else:
            degenerate_run = 0
        _pivot(T, basis, r, e)
        pivots += 1


# -- vertex certificates ---------------------------------------------------------

def _standard_form(lp: LinearProgram, x):
    """Equality form [A | S] (x, s) = b, with one slack per inequality row."""
    A = lp.matrix().toarray()
    b = np.array(lp.rhs)
    ineq = [r for r, s in enumerate(lp.senses) if s != "="]
    S = np.zeros((lp.n_rows, len(ineq)))
    for k, r in enumerate(ineq):
        S[r, k] = 1.0 if lp.senses[r] == "<=" else -1.0
    full = np.hstack([A, S])
    slack = np.array([(b[r] - A[r] @ x) * (1.0 if lp.senses[r] == "<=" else -1.0)
                      for r in ineq])
    return full, np.concatenate([x, np.maximum(slack, 0.0)])


def is_vertex(lp: LinearProgram, x, tol: float = SUPPORT_TOL) -> bool:
    """True iff the columns of the positive standard-form variables are independent."""
    full, xs = _standard_form(lp, np.asarray(x, dtype=float))
    cols = np.flatnonzero(xs > tol)
    if cols.size == 0:
        return True
    return np.linalg.matrix_rank(full[:, cols], tol=1e-9) == cols.size


def purify(lp: LinearProgram, x, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Move a feasible point to a vertex without increasing the objective."""
    n = lp.n_vars
    c = np.concatenate([lp.cost_vector(), np.zeros(sum(s != "=" for s in lp.senses))])
    full, xs = _standard_form(lp, np.asarray(x, dtype=float))
    for _ in range(full.shape[1] + 1):
        xs[xs <= tol] = 0.0
        cols = np.flatnonzero(xs > 0)
        sub = full[:, cols]
        if cols.size == 0 or np.linalg.matrix_rank(sub, tol=1e-9) == cols.size:
            return xs[:n]
        _, _, vt = np.linalg.svd(sub)
        d = np.zeros_like(xs)
        d[cols] = vt[-1]
        if c @ d > 0 or (abs(c @ d) <= 1e-12 and not np.any(d < -1e-12)):
            d = -d
        neg = np.flatnonzero(d < -1e-12)
        if neg.size == 0:
            raise LPUnbounded()
        steps = xs[neg] / -d[neg]
        k = int(np.argmin(steps))
        xs = xs + steps[k] * d
        xs[neg[k]] = 0.0
    raise LPStalled()
