"""Bicriteria baseline: round the assignment LP by filtering.

Each client gets a fractional radius r_i = (R_i / eps)^(1/p) where R_i is its
LP connection cost. Clients are scanned by increasing R_i; a client is
selected unless its closed ball meets the ball of an already selected
client, and the facility nearest to every selected client is opened. The
selected balls are disjoint and each carries LP opening mass at least
1 - eps, so at most k / (1 - eps) facilities open.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .instance import CostProfile, Instance, as_center_set, evaluate
from .rounding import LP1Solution, solve_lp1

DEFAULT_EPSILONS = (0.1, 0.2, 0.3, 0.4, 0.5)


@dataclass(frozen=True)
class FilteringParams:
    epsilon: float

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")

    def max_centers(self, k: int) -> int:
        return math.ceil(k / (1 - self.epsilon) - 1e-12)


@dataclass
class FilteringResult:
    centers: tuple[int, ...]
    cost: CostProfile
    selected_clients: tuple[int, ...]
    radii: np.ndarray            # per client position
    lp_objective: float
    epsilon: float


def abv_filtering(inst: Instance, params: FilteringParams | float, lp1: Optional[LP1Solution] = None,
                  method: str = "auto") -> FilteringResult:
    if not isinstance(params, FilteringParams):
        params = FilteringParams(float(params))
    eps, p = params.epsilon, inst.p
    if lp1 is None:
        lp1 = solve_lp1(inst, method)
    if _integral_opening(lp1):
        # x <= y keeps every client's mass on open facilities, so nearest-open
        # assignment is no worse than the LP; filtering could only merge clients
        centers = as_center_set(inst.facilities[lp1.y > 0.5])
        return FilteringResult(centers, evaluate(inst, centers), (), np.zeros(inst.n), lp1.z, eps)
    dp = inst.cf ** p
    R = np.maximum((lp1.x * dp).sum(axis=1), 0.0)
    r = (R / eps) ** (1.0 / p)
    dcc = inst.distance[np.ix_(inst.clients, inst.clients)]

    order = np.lexsort((inst.clients, R))
    alive = np.ones(inst.n, dtype=bool)
    selected = []
    for i in order:
        if not alive[i]:
            continue
        selected.append(int(i))
        alive &= ~(dcc[i] <= r[i] + r)
    sel = np.array(selected, dtype=int)

    opened = []
    ids = inst.facilities
    for i in sel:
        row = inst.cf[i]
        best = np.lexsort((ids, row))[0]
        if row[best] > r[i] * (1 + 1e-9) + 1e-12:
            raise AssertionError(f"client {inst.clients[i]}: no facility inside its filtering ball")
        opened.append(int(ids[best]))

    _check_disjoint(inst, sel, r)
    centers = as_center_set(opened)
    bound = params.max_centers(inst.k)
    if len(centers) > bound:
        raise AssertionError(f"{len(centers)} centers exceed ceil(k/(1-eps)) = {bound}")
    return FilteringResult(centers, evaluate(inst, centers),
                           tuple(int(inst.clients[i]) for i in sel), r, lp1.z, eps)


def _integral_opening(lp1: LP1Solution, tol: float = 1e-7) -> bool:
    y = np.asarray(lp1.y)
    return bool(np.all(np.minimum(y, 1 - y) <= tol))


def _check_disjoint(inst: Instance, sel: np.ndarray, r: np.ndarray) -> None:
    if len(sel) < 2:
        return
    d = inst.distance[np.ix_(inst.clients[sel], inst.clients[sel])]
    gap = d - (r[sel][:, None] + r[sel][None, :])
    np.fill_diagonal(gap, np.inf)
    if np.any(gap <= 0):
        a, b = np.argwhere(gap <= 0)[0]
        raise AssertionError(f"filtered balls of clients {inst.clients[sel[a]]} and "
                             f"{inst.clients[sel[b]]} intersect")


def match_epsilon(inst: Instance, target: int, epsilons: Sequence[float] = DEFAULT_EPSILONS,
                  lp1: Optional[LP1Solution] = None, method: str = "auto"):
    """Run filtering for every epsilon and keep the one whose center count is
    closest to ``target``; ties go to the run with more centers, then the
    smaller epsilon. Returns (chosen result, all results)."""
    if lp1 is None:
        lp1 = solve_lp1(inst, method)
    runs = [abv_filtering(inst, e, lp1=lp1) for e in epsilons]
    best = min(runs, key=lambda res: (abs(len(res.centers) - target), -len(res.centers), res.epsilon))
    return best, runs
