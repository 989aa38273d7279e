"""Iterative LP rounding to a pseudo-solution with at most k + m centers.

Outline:

1. Solve the assignment LP (``solve_lp1``): variables x_ij, y_j and the
   max-group-cost z.
2. Split every facility into copies, one per distinct nonzero assignment
   level, so that each client uses a copy either fully or not at all
   (``split_facilities``).
3. Round distances to the nearest power of (1 + lam) (``round_distances``).
   Rounded distances are kept as integer exponents so that ball membership
   and radius shrinking are exact.
4. Pick representatives with disjoint candidate sets (``init_representatives``)
   and repeatedly shrink the radius of a non-representative client whose
   inner ball is saturated, re-solving the reduced LP to a vertex each time
   (``iterative_round``). The support of the final vertex is the center set.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .instance import CostProfile, Instance, as_center_set, evaluate, pad_centers
from .lp import SUPPORT_TOL, LinearProgram, VertexSolution, solve_to_vertex

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = math.sqrt(2.0 / 3.0)
# exponent standing in for a rounded distance of exactly 0
ZERO_LEVEL = -(2**40)
ITERATION_CAP_CONSTANT = 64
LEVEL_MERGE_TOL = 1e-9


class RoundingStalled(RuntimeError):
    pass


def approximation_factor(lam: float, p: float = 1.0) -> float:
    """((1 + 2(1+lam)/lam) (1+lam))^p; equals (5 + 2 sqrt 6)^p at lam = sqrt(2/3)."""
    return ((1 + 2 * (1 + lam) / lam) * (1 + lam)) ** p


def coverage_radius_factor(lam: float) -> float:
    return 1 + 2 * (1 + lam) / lam


# -- LP1 ------------------------------------------------------------------------

@dataclass
class LP1Solution:
    x: np.ndarray  # (n, |F|) assignment, rows/cols are client/facility positions
    y: np.ndarray  # (|F|,) opening
    z: float
    vertex: VertexSolution


def build_lp1(inst: Instance):
    """The assignment LP. Returns (lp, x index matrix, y indices, z index).

    Row blocks (group, link, card, open, assign) are recorded in ``lp.blocks``.
    """
    n, nf, m = inst.n, len(inst.facilities), inst.m
    ci, cj = np.nonzero(np.ones((n, nf), dtype=bool))
    nx = len(ci)
    lp = LinearProgram("lp1")
    xcols = lp.add_variables(nx, "x")
    xi = xcols.reshape(n, nf)
    yi = lp.add_variables(nf, "y")
    zi = lp.add_variable("z")
    lp.minimize({zi: 1.0})
    blocks = {}

    dp = inst.cf ** inst.p
    # group s: sum_i w_s(i) sum_j d_ij^p x_ij - z <= 0
    G = inst.weights[:, ci] * dp[ci, cj][None, :]
    G = sp.hstack([sp.csr_matrix(G), sp.csr_matrix((m, nf)),
                   sp.csr_matrix(-np.ones((m, 1)))])
    blocks["group"] = lp.add_rows(G, "<=", 0.0, prefix="group")
    # x_ij - y_j <= 0
    rows = np.arange(nx)
    link = sp.csr_matrix(
        (np.r_[np.ones(nx), -np.ones(nx)], (np.r_[rows, rows], np.r_[xcols, yi[cj]])),
        shape=(nx, lp.n_vars))
    blocks["link"] = lp.add_rows(link, "<=", 0.0, prefix="link")
    card = sp.csr_matrix((np.ones(nf), (np.zeros(nf, dtype=int), yi)), shape=(1, lp.n_vars))
    blocks["card"] = lp.add_rows(card, "=", float(inst.k), prefix="card")
    # y_j <= 1 is valid for every integral solution and keeps copy capacities in (0, 1]
    cap = sp.csr_matrix((np.ones(nf), (np.arange(nf), yi)), shape=(nf, lp.n_vars))
    blocks["open"] = lp.add_rows(cap, "<=", 1.0, prefix="open")
    assign = sp.csr_matrix((np.ones(nx), (ci, xcols)), shape=(n, lp.n_vars))
    blocks["assign"] = lp.add_rows(assign, "=", 1.0, prefix="assign")
    lp.blocks = blocks
    return lp, xi, yi, zi


def _unpack_lp1(sol: VertexSolution, xi, yi, zi) -> LP1Solution:
    v = sol.values
    return LP1Solution(x=v[xi], y=v[yi], z=float(v[zi]), vertex=sol)


def solve_lp1(inst: Instance, method: str = "auto") -> LP1Solution:
    lp, xi, yi, zi = build_lp1(inst)
    return _unpack_lp1(solve_to_vertex(lp, method=method), xi, yi, zi)


# -- splitting ------------------------------------------------------------------

@dataclass(frozen=True)
class SplitFacility:
    original_id: int
    copy_index: int
    capacity: float


@dataclass
class SplitResult:
    copies: list[SplitFacility]
    orig_pos: np.ndarray   # (nc,) facility position of each copy
    capacity: np.ndarray   # (nc,)
    member: np.ndarray     # (n, nc) bool, F_i
    x: np.ndarray          # (n, nc) split assignment, each entry 0 or capacity

    @property
    def n_copies(self) -> int:
        return len(self.copies)


def _levels(values: np.ndarray, tol: float) -> np.ndarray:
    vals = np.sort(values[values > tol])
    if vals.size == 0:
        return vals
    keep = np.r_[True, np.diff(vals) > tol]
    # representative of a run of near-equal values is its largest member
    ends = np.r_[np.flatnonzero(keep)[1:] - 1, vals.size - 1]
    return vals[ends]


def split_facilities(inst: Instance, x, y, tol: float = LEVEL_MERGE_TOL) -> SplitResult:
    """Split facility j into one copy per distinct nonzero level of x[:, j].

    With levels l_1 < ... < l_r the copies get capacities l_1, l_2 - l_1, ...;
    a client with x_ij = l_t uses copies 1..t. Any opening above the top level
    goes into one extra copy that no client uses, so y-mass is preserved.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, nf = x.shape
    copies, orig, caps, cols = [], [], [], []
    for j in range(nf):
        lv = _levels(x[:, j], tol)
        prev = 0.0
        fid = int(inst.facilities[j])
        col_of_client = np.full(n, -1)
        for t, level in enumerate(lv):
            copies.append(SplitFacility(fid, t, float(level - prev)))
            orig.append(j)
            caps.append(level - prev)
            prev = level
        # clients whose x_ij rounds to level t use the first t+1 copies
        if lv.size:
            pos = np.searchsorted(lv, x[:, j] - tol)
            pos[x[:, j] <= tol] = -1
            col_of_client = pos
        cols.append((len(copies) - lv.size, col_of_client))
        excess = y[j] - prev
        if excess > tol:
            copies.append(SplitFacility(fid, int(lv.size), float(excess)))
            orig.append(j)
            caps.append(excess)

    nc = len(copies)
    member = np.zeros((n, nc), dtype=bool)
    for start, col_of_client in cols:
        for i in np.flatnonzero(col_of_client >= 0):
            member[i, start:start + col_of_client[i] + 1] = True
    capacity = np.array(caps, dtype=float)
    return SplitResult(copies, np.array(orig, dtype=int), capacity, member,
                       member * capacity[None, :])


# -- distance rounding ------------------------------------------------------------

@dataclass
class RoundedDistances:
    """Distances rounded to the nearest power of (1 + lam).

    ``levels[i, j]`` is the integer exponent (``ZERO_LEVEL`` for a zero
    distance); ``values`` the rounded distances themselves.
    """
    lam: float
    levels: np.ndarray
    values: np.ndarray

    def value(self, level):
        level = np.asarray(level)
        out = np.power(1.0 + self.lam, np.where(level == ZERO_LEVEL, 0, level).astype(float))
        return np.where(level == ZERO_LEVEL, 0.0, out)


def distance_level(d, lam: float) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore"):
        e = np.floor(np.log(d) / math.log1p(lam) + 0.5)
    return np.where(d > 0, e, ZERO_LEVEL).astype(np.int64)


def round_distances(inst: Instance, lam: float) -> RoundedDistances:
    if not 0 < lam <= 1:
        raise ValueError("lambda must be in (0, 1]")
    levels = distance_level(inst.cf, lam)
    rd = RoundedDistances(lam, levels, np.zeros(levels.shape))
    rd.values = rd.value(levels)
    return rd


def round_distance(d: float, lam: float) -> float:
    lv = distance_level(np.array([d]), lam)
    return float(RoundedDistances(lam, lv, lv).value(lv)[0])


# -- representatives ---------------------------------------------------------------

def init_representatives(member: np.ndarray, radius_level: np.ndarray,
                         order_ids: Optional[np.ndarray] = None) -> np.ndarray:
    """Greedy maximal set of clients with pairwise disjoint candidate sets.

    Clients are scanned by increasing radius, ties by client id.
    Returns a boolean mask over clients.
    """
    n = member.shape[0]
    ids = np.arange(n) if order_ids is None else np.asarray(order_ids)
    order = np.lexsort((ids, radius_level))
    used = np.zeros(member.shape[1], dtype=bool)
    star = np.zeros(n, dtype=bool)
    for i in order:
        if not np.any(used & member[i]):
            star[i] = True
            used |= member[i]
    return star


# -- the rounding loop ------------------------------------------------------------

@dataclass
class PseudoSolution:
    centers: tuple[int, ...]
    size_bound_witness: int
    cost: CostProfile
    lp_lower_bound: float
    lam: float
    final_lp_objective: float
    iterations: int
    support_size: int
    trace: list[dict] = field(default_factory=list)

    def write_trace(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.trace:
                fh.write(json.dumps(row) + "\n")


class _State:
    """Mutable per-client state: candidate sets F_i, radius exponents, status."""

    def __init__(self, inst: Instance, split: SplitResult, rd: RoundedDistances):
        self.inst = inst
        self.split = split
        self.lam = rd.lam
        self.level = rd.levels[:, split.orig_pos]          # (n, nc)
        self.dist = rd.values[:, split.orig_pos]
        self.dp = self.dist ** inst.p
        self.F = split.member.copy()
        lv = np.where(self.F, self.level, ZERO_LEVEL - 1)
        self.E = lv.max(axis=1)                              # radius exponent D_i
        self.E[self.E < ZERO_LEVEL] = ZERO_LEVEL
        self.star = init_representatives(self.F, self.E, inst.clients)

    def D(self) -> np.ndarray:
        return np.where(self.E == ZERO_LEVEL, 0.0, (1.0 + self.lam) ** self.E.astype(float))

    def B(self) -> np.ndarray:
        inner = self.level <= (self.E - 1)[:, None]
        zero = (self.E == ZERO_LEVEL)[:, None]
        return self.F & (inner | zero)

    def bad2_rows(self) -> np.ndarray:
        B = self.B()
        return np.flatnonzero(~self.star & (self.E > ZERO_LEVEL) & B.any(axis=1))

    def build_lp(self) -> tuple[LinearProgram, np.ndarray, int]:
        inst = self.inst
        nc = self.split.n_copies
        B = self.B()
        Dp = self.D() ** inst.p
        Wstar = inst.weights * self.star[None, :]
        Wfree = inst.weights * (~self.star)[None, :]
        G = Wstar @ (self.F * self.dp) + Wfree @ (B * (self.dp - Dp[:, None]))
        const = Wfree @ Dp

        lp = LinearProgram("lp_rounding")
        yi = lp.add_variables(nc, "y")
        zi = lp.add_variable("z")
        lp.minimize({zi: 1.0})
        lp.add_rows(sp.hstack([sp.csr_matrix(G), sp.csr_matrix(-np.ones((inst.m, 1)))]),
                    "<=", -const, prefix="group")
        lp.add_constraint(yi, 1.0, "=", float(inst.k), name="card")
        star_rows = np.flatnonzero(self.star)
        if star_rows.size:
            lp.add_rows(sp.hstack([sp.csr_matrix(self.F[star_rows].astype(float)),
                                   sp.csr_matrix((star_rows.size, 1))]),
                        "=", 1.0, prefix="star")
        bad = self.bad2_rows()
        if bad.size:
            lp.add_rows(sp.hstack([sp.csr_matrix(B[bad].astype(float)),
                                   sp.csr_matrix((bad.size, 1))]),
                        "<=", 1.0, prefix="inner")
        return lp, yi, zi

    def shrink(self, i: int) -> None:
        self.F[i] = self.B()[i]
        if self.E[i] > ZERO_LEVEL:
            self.E[i] -= 1
        if not np.any(self.F[i] & (self.level[i] > ZERO_LEVEL)):
            # only zero-distance copies left: the radius has collapsed to 0
            self.E[i] = ZERO_LEVEL

    def update_star(self, i: int) -> list[int]:
        """Make i a representative unless someone with radius <= D_i shares a copy."""
        rivals = np.flatnonzero(self.star & (self.F & self.F[i][None, :]).any(axis=1))
        if np.all(self.E[rivals] > self.E[i]):
            self.star[rivals] = False
            self.star[i] = True
            return rivals.tolist()
        return []

    def check_disjoint(self) -> None:
        counts = self.F[self.star].sum(axis=0)
        if np.any(counts > 1):
            raise AssertionError("representative candidate sets overlap")

    def coverage_violations(self, y: np.ndarray, tol: float = 1e-6) -> list[int]:
        """Non-representatives with < 1 unit of y within the coverage radius."""
        radius = coverage_radius_factor(self.lam) * self.D()
        free = np.flatnonzero(~self.star)
        if free.size == 0:
            return []
        close = self.dist[free] <= radius[free, None] * (1 + 1e-12)
        mass = close.astype(float) @ y
        return free[mass < 1 - tol].tolist()


def _iteration_cap(inst: Instance, lam: float) -> int:
    d = inst.cf[inst.cf > 0]
    ratio = float(d.max() / d.min()) if d.size else 1.0
    return int(math.ceil(ITERATION_CAP_CONSTANT * inst.n * max(1.0, math.log2(ratio)) / lam)) + inst.n


def iterative_round(inst: Instance, lam: float = DEFAULT_LAMBDA, method: str = "auto",
                    lp1: Optional[LP1Solution] = None, check_invariants: bool = True,
                    trace: bool = False, max_iterations: Optional[int] = None) -> PseudoSolution:
    """Round the LP relaxation to at most k + m centers.

    ``check_invariants`` asserts at every iteration that the LP value does not
    increase, that representatives keep disjoint candidate sets, and that every
    non-representative has a full unit of opening within its coverage radius.
    """
    if not 0 < lam <= 1:
        raise ValueError("lambda must be in (0, 1]")
    if lp1 is None:
        lp1 = solve_lp1(inst, method=method)
    split = split_facilities(inst, lp1.x, lp1.y)
    state = _State(inst, split, round_distances(inst, lam))
    cap = _iteration_cap(inst, lam) if max_iterations is None else max_iterations

    rows = []
    prev_obj = math.inf
    shrunk, entered, removed = None, False, []
    it = 0
    while True:
        lp, yi, zi = state.build_lp()
        sol = solve_to_vertex(lp, method=method)
        y = sol.values[yi]
        obj = float(sol.values[zi])
        support = int(np.count_nonzero(y > SUPPORT_TOL))
        if check_invariants:
            if obj > prev_obj + 1e-6 * max(1.0, abs(prev_obj)):
                raise AssertionError(f"LP value increased: {prev_obj} -> {obj}")
            state.check_disjoint()
            bad = state.coverage_violations(y)
            if bad:
                raise AssertionError(f"coverage fails for clients {bad[:5]}")
        row = {
            "iteration": it, "lp_objective": obj, "n_star": int(state.star.sum()),
            "n_free": int((~state.star).sum()), "shrunk_client": shrunk,
            "entered_star": entered, "removed_from_star": removed, "support_size": support,
        }
        if trace:
            row["coverage_ok"] = not state.coverage_violations(y)
        rows.append(row)
        prev_obj = min(prev_obj, obj)

        cand = state.bad2_rows()
        if cand.size:
            mass = state.B()[cand].astype(float) @ y
            tight = cand[mass >= 1 - SUPPORT_TOL]
        else:
            tight = cand
        if tight.size == 0:
            break
        it += 1
        if it > cap:
            raise RoundingStalled(f"rounding stalled after {cap} iterations")
        # lowest client id first
        i = int(tight[np.argmin(inst.clients[tight])])
        state.shrink(i)
        removed = [int(inst.clients[r]) for r in state.update_star(i)]
        shrunk = int(inst.clients[i])
        entered = bool(state.star[i])

    open_pos = np.unique(split.orig_pos[y > SUPPORT_TOL])
    centers = as_center_set(inst.facilities[open_pos])
    if len(centers) < inst.k:
        # the rounding LP may stack opening on few copies; extra centers only lower the cost
        centers = pad_centers(inst, centers, inst.k)
    bound = inst.k + inst.m
    if len(centers) > bound:
        raise AssertionError(f"{len(centers)} centers exceed k + m = {bound}")
    return PseudoSolution(
        centers=centers, size_bound_witness=bound, cost=evaluate(inst, centers),
        lp_lower_bound=lp1.z, lam=lam, final_lp_objective=prev_obj, iterations=it,
        support_size=support, trace=rows)
