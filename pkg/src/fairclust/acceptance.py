"""Acceptance suite: guarantees checked against brute force at micro scale,
plus the benchmark center-count and dominance checks on Credit and COMPAS.

The report holds no timings, so two runs on the same inputs give the same
bytes.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .convert import (ConversionConfig, MinMaxAssignmentProblem, best_k_subset,
                      convert_with_beta_search, minmax_assign)
from .datasets import DatasetError, builtin_spec, load
from .filtering import match_epsilon
from .instance import Group, Instance, brute_force_opt, euclidean_distances, evaluate
from .lp import LinearProgram, is_vertex, solve_to_vertex
from .rounding import (DEFAULT_LAMBDA, approximation_factor, iterative_round, solve_lp1)
from .sparsify import enumerate_instances, is_alpha_sparse

log = logging.getLogger(__name__)

REL_TOL = 1e-6
BENCH_DATASETS = ("credit", "compas")
BENCH_K = tuple(range(5, 51, 5))
BENCH_LAMBDAS = (0.1, 0.2, 0.3, 0.4, 0.5)
BENCH_EPSILONS = (0.1, 0.2, 0.3, 0.4, 0.5)
COMPARE_LAMBDA = 0.3


# -- deterministic instance generators ------------------------------------------

def micro_instance(seed: int) -> Instance:
    """n <= 12 clients, <= 8 facilities, k <= 4, m <= 3, p in {1, 2}; points in the plane."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    nf = int(rng.integers(2, 9))
    k = int(rng.integers(1, min(4, nf) + 1))
    m = int(rng.integers(1, 4))
    p = int(rng.choice([1, 2]))
    pts = rng.uniform(0, 10, size=(n + nf, 2))
    lab = rng.integers(0, m, n)
    lab[:m] = np.arange(m)
    clients = list(range(n))
    groups = [Group.uniform([i for i in clients if lab[i] == s]) for s in range(m)]
    return Instance(euclidean_distances(pts), clients, list(range(n, n + nf)), groups, k, p)


def sparse_micro_instance(seed: int) -> Instance:
    """One group, n <= 8 clients, <= 5 facilities, p = 1."""
    rng = np.random.default_rng(10_000 + seed)
    n = int(rng.integers(4, 9))
    nf = int(rng.integers(2, 6))
    k = int(rng.integers(1, min(3, nf) + 1))
    pts = rng.uniform(0, 10, size=(n + nf, 2))
    return Instance(euclidean_distances(pts), range(n), range(n, n + nf),
                    [Group.uniform(range(n))], k, 1)


def matroid_lp(seed: int):
    """Partition-matroid base polytope with up to 3 extra inequalities.

    Returns (lp, k, m). Each extra row is tight-or-slack at the uniform
    point, which keeps the LP feasible.
    """
    rng = np.random.default_rng(20_000 + seed)
    k = int(rng.integers(1, 7))
    m = int(rng.integers(0, 4))
    sizes = rng.integers(1, 5, size=k)
    lp = LinearProgram(f"matroid{seed}")
    parts = [lp.add_variables(int(s), f"p{j}_") for j, s in enumerate(sizes)]
    nv = lp.n_vars
    c = rng.normal(size=nv)
    lp.minimize({i: float(c[i]) for i in range(nv)})
    for x in parts:
        lp.add_constraint(x.tolist(), [1.0] * len(x), "=", 1.0)
    center = np.concatenate([np.full(len(x), 1.0 / len(x)) for x in parts])
    for _ in range(m):
        a = rng.normal(size=nv)
        lp.add_constraint(list(range(nv)), a.tolist(), "<=", float(a @ center + rng.uniform(0, 0.5)))
    return lp, k, m


def minmax_problem(seed: int) -> MinMaxAssignmentProblem:
    rng = np.random.default_rng(30_000 + seed)
    k = int(rng.integers(1, 5))
    m = int(rng.integers(1, 3))
    parts, costs, nxt = [], [], 0
    for _ in range(k):
        s = int(rng.integers(1, 5))
        parts.append(tuple(range(nxt, nxt + s)))
        nxt += s
        costs.append(rng.uniform(0, 1, size=(m, s)))
    return MinMaxAssignmentProblem(tuple(parts), tuple(costs))


def _le(a: float, b: float, rel: float = REL_TOL) -> bool:
    return a <= b + rel * max(1.0, abs(b))


# -- report ------------------------------------------------------------------------

@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"criterion {self.id} [{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.summary}"


# -- criteria 1-3, 5 share the rounding runs ----------------------------------------

def _micro_runs(n: int = 50):
    runs = []
    for seed in range(n):
        inst = micro_instance(seed)
        opt_centers, opt = brute_force_opt(inst)
        ps = iterative_round(inst, DEFAULT_LAMBDA, check_invariants=False, trace=True)
        runs.append((seed, inst, opt_centers, opt.objective, ps))
    return runs


def criterion_1(runs) -> CriterionResult:
    bad, worst = [], 0.0
    for seed, inst, _, opt, ps in runs:
        bound = approximation_factor(DEFAULT_LAMBDA, inst.p) * opt
        ok = len(ps.centers) <= inst.k + inst.m and _le(ps.cost.objective, bound)
        if opt > 0:
            worst = max(worst, ps.cost.objective / opt / approximation_factor(DEFAULT_LAMBDA, inst.p))
        if not ok:
            bad.append(seed)
    return CriterionResult(1, "bicriteria guarantee", not bad,
                           f"{len(runs) - len(bad)}/{len(runs)} instances within (5+2sqrt6)^p and k+m",
                           {"failed_seeds": bad, "worst_ratio_to_bound": round(worst, 12)})


def criterion_2(runs) -> CriterionResult:
    bad = []
    steps = 0
    for seed, _, _, _, ps in runs:
        objs = [r["lp_objective"] for r in ps.trace]
        steps += max(0, len(objs) - 1)
        if any(b > a + 1e-6 * max(1.0, abs(a)) for a, b in zip(objs, objs[1:])):
            bad.append(seed)
    return CriterionResult(2, "LP objective non-increasing", not bad,
                           f"{steps} steps checked, {len(bad)} traces with an increase",
                           {"failed_seeds": bad})


def criterion_3(runs) -> CriterionResult:
    bad, rows = [], 0
    for seed, _, _, _, ps in runs:
        rows += len(ps.trace)
        if not all(r.get("coverage_ok", False) for r in ps.trace):
            bad.append(seed)
    return CriterionResult(3, "coverage of non-representative clients", not bad,
                           f"{rows} iterations checked, {len(bad)} runs with a violation",
                           {"failed_seeds": bad})


def criterion_4(n: int = 100) -> CriterionResult:
    bad_support, bad_integral, not_vertex = [], [], []
    for seed in range(n):
        lp, k, m = matroid_lp(seed)
        sol = solve_to_vertex(lp)
        x = sol.values
        if len(sol.support) > k + m:
            bad_support.append(seed)
        if not is_vertex(lp, x):
            not_vertex.append(seed)
        if m == 0 and not np.all((np.abs(x) < 1e-9) | (np.abs(x - 1) < 1e-9)):
            bad_integral.append(seed)
    ok = not (bad_support or bad_integral or not_vertex)
    return CriterionResult(4, "vertex support <= k+m", ok,
                           f"{n} LPs, {len(bad_support)} over the bound, {len(bad_integral)} "
                           f"fractional without extra rows, {len(not_vertex)} non-vertex",
                           {"support": bad_support, "integral": bad_integral, "vertex": not_vertex})


def criterion_5(runs) -> CriterionResult:
    bad = []
    for seed, inst, _, opt, ps in runs:
        T = best_k_subset(inst, ps.centers)
        bound = 3 ** (inst.p - 1) * (ps.cost.objective + 2 * opt)
        if len(T) > inst.k or not _le(evaluate(inst, T).objective, bound, 1e-9):
            bad.append(seed)
    return CriterionResult(5, "exhaustive subset bound", not bad,
                           f"{len(runs) - len(bad)}/{len(runs)} within 3^(p-1)(cost(S)+2opt)",
                           {"failed_seeds": bad})


def criterion_6(n: int = 50, eps: float = 0.5) -> CriterionResult:
    bad, worst = [], 0.0
    for seed in range(n):
        prob = minmax_problem(seed)
        theta = min(max(sum(np.asarray(prob.costs[j])[g, v] for j, v in enumerate(choice))
                        for g in range(prob.m))
                    for choice in itertools.product(*(range(len(s)) for s in prob.parts)))
        res = minmax_assign(prob, eps)
        if theta > 0:
            worst = max(worst, res.value / theta)
        exact = prob.m > 1 or abs(res.value - theta) <= 1e-12 * max(1.0, theta)
        if not (_le(res.value, (1 + eps) * theta, 1e-9) and exact):
            bad.append(seed)
    return CriterionResult(6, "min-max selection (1+eps)", not bad,
                           f"{n - len(bad)}/{n} within 1.5 theta* (exact for m=1)",
                           {"failed_seeds": bad, "worst_ratio": round(worst, 12)})


def _sparse_runs(n: int = 20):
    out = []
    for seed in range(n):
        inst = sparse_micro_instance(seed)
        opt_c, opt = brute_force_opt(inst)
        out.append((seed, inst, opt_c, opt.objective))
    return out


def criterion_7(runs, t: int = 1) -> CriterionResult:
    bad, counts = [], []
    for seed, inst, opt_c, opt in runs:
        alpha = opt / (inst.m * t)
        stream = enumerate_instances(inst, t)
        hit = False
        for cand in stream:
            J = cand.instance
            if not set(opt_c) <= {int(f) for f in J.facilities}:
                # the definition measures distance to an optimum of the candidate itself
                ref = brute_force_opt(J)[0]
            else:
                ref = opt_c
            if is_alpha_sparse(J, alpha, ref) and \
                    abs(brute_force_opt(J)[1].objective - opt) <= 1e-9 * max(1.0, opt):
                hit = True
                break
        counts.append(stream.generated)
        if not hit:
            bad.append(seed)
    return CriterionResult(7, "sparsifier emits a sparse candidate with unchanged optimum", not bad,
                           f"{len(runs) - len(bad)}/{len(runs)} instances", {"failed_seeds": bad})


def criterion_8(runs, cap_seconds: float = 600.0) -> CriterionResult:
    cfg = ConversionConfig(epsilon_prime=0.9, delta=0.05, t=1)
    factor = 5 + 2 * math.sqrt(6) + 0.5
    bad, capped, worst = [], [], 0.0
    start = time.perf_counter()
    for seed, inst, _, opt in runs:
        if time.perf_counter() - start > cap_seconds:
            capped.append(seed)
            continue
        best = math.inf
        stream = enumerate_instances(inst, cfg.t, unique=True)
        for cand in stream:
            J = cand.instance
            ps = iterative_round(J, DEFAULT_LAMBDA, check_invariants=False)
            res = convert_with_beta_search(J, ps.centers, cfg)
            if len(res.centers) > inst.k:
                bad.append(seed)
            best = min(best, evaluate(inst, res.centers).objective)
            if res.truncated:
                capped.append(seed)
        if stream.truncated:
            capped.append(seed)
        if opt > 0:
            worst = max(worst, best / opt)
        if not _le(best, factor * opt):
            bad.append(seed)
    capped = sorted(set(capped))
    ok = not bad and not capped
    return CriterionResult(8, "sparsify + convert pipeline", ok,
                           f"{len(runs) - len(set(bad))}/{len(runs)} within (5+2sqrt6+0.5) opt, "
                           f"{len(capped)} hit caps",
                           {"failed_seeds": sorted(set(bad)), "capped_seeds": capped,
                            "worst_ratio": round(worst, 12),
                            "theory_conditions_met": cfg.theory_conditions_met(1.0)})


# -- benchmark criteria -------------------------------------------------------------

def benchmark_table(datasets=BENCH_DATASETS, ks=BENCH_K, lambdas=BENCH_LAMBDAS,
                    epsilons=BENCH_EPSILONS, data_dir=None, progress: Callable = None) -> dict:
    """Per (dataset, k): rounding counts/objectives for every lambda and the
    matched filtering run against the comparison lambda."""
    table = {}
    for name in datasets:
        rows = []
        try:
            base = load(builtin_spec(name), k=ks[0], root=data_dir)
        except DatasetError as exc:
            table[name] = {"error": str(exc)}
            continue
        for k in ks:
            inst = base.with_k(k)
            t0 = time.perf_counter()
            lp1 = solve_lp1(inst)
            row = {"k": k, "lp1": lp1.z, "rounding": {}}
            for lam in lambdas:
                ps = iterative_round(inst, lam, lp1=lp1, check_invariants=False)
                row["rounding"][str(lam)] = {"num_centers": len(ps.centers),
                                             "objective": ps.cost.objective}
            target = row["rounding"][str(COMPARE_LAMBDA)]["num_centers"]
            chosen, all_runs = match_epsilon(inst, target, epsilons, lp1=lp1)
            row["abv"] = {"epsilon": chosen.epsilon, "num_centers": len(chosen.centers),
                          "objective": chosen.cost.objective,
                          "counts": {str(r.epsilon): len(r.centers) for r in all_runs}}
            rows.append(row)
            if progress:
                progress(f"{name} k={k} done in {time.perf_counter() - t0:.1f}s")
        table[name] = {"rows": rows}
    return table


def criterion_9(table) -> CriterionResult:
    ok, details, parts = True, {}, []
    for name, data in table.items():
        if "error" in data:
            ok = False
            details[name] = {"error": data["error"]}
            parts.append(f"{name}: {data['error']}")
            continue
        wins = [r["k"] for r in data["rows"]
                if r["rounding"][str(COMPARE_LAMBDA)]["objective"] <= r["abv"]["objective"] * (1 + 1e-9)]
        need = math.ceil(0.8 * len(data["rows"]))
        ok &= len(wins) >= need
        details[name] = {"wins": wins, "needed": need,
                         "pairs": [[r["k"], r["rounding"][str(COMPARE_LAMBDA)]["num_centers"],
                                    r["rounding"][str(COMPARE_LAMBDA)]["objective"],
                                    r["abv"]["epsilon"], r["abv"]["num_centers"],
                                    r["abv"]["objective"]] for r in data["rows"]]}
        parts.append(f"{name}: {len(wins)}/{len(data['rows'])} k values")
    return CriterionResult(9, "rounding beats filtering at matched center counts", ok,
                           "; ".join(parts), details)


def criterion_10(table) -> CriterionResult:
    ok, details, parts = True, {}, []
    for name, data in table.items():
        if "error" in data:
            ok = False
            details[name] = {"error": data["error"]}
            parts.append(f"{name}: {data['error']}")
            continue
        cells = [(r["k"], lam, v["num_centers"]) for r in data["rows"]
                 for lam, v in r["rounding"].items()]
        out_of_range = [c for c in cells if not c[0] <= c[2] <= c[0] + 2]
        near = sum(1 for k, _, c in cells if c in (k, k + 1))
        frac = near / len(cells)
        ok &= not out_of_range and frac >= 0.9
        details[name] = {"out_of_range": out_of_range, "k_or_k_plus_1": near, "cells": len(cells),
                         "counts": {str(r["k"]): {lam: v["num_centers"] for lam, v in r["rounding"].items()}
                                    for r in data["rows"]}}
        parts.append(f"{name}: {near}/{len(cells)} cells at k or k+1, {len(out_of_range)} outside [k,k+2]")
    return CriterionResult(10, "center counts", ok, "; ".join(parts), details)


# -- driver --------------------------------------------------------------------------

ALL_CRITERIA = tuple(range(1, 11))


def run_acceptance(criteria=ALL_CRITERIA, data_dir=None, progress: Callable = None) -> list[CriterionResult]:
    """Criteria 1-10. Determinism (11) compares two reports and lives in the CLI."""
    say = progress or (lambda msg: log.info(msg))
    results = []
    crit = set(criteria)
    if crit & {1, 2, 3, 5}:
        t0 = time.perf_counter()
        runs = _micro_runs()
        say(f"micro rounding runs: {time.perf_counter() - t0:.1f}s")
        for c, fn in ((1, criterion_1), (2, criterion_2), (3, criterion_3), (5, criterion_5)):
            if c in crit:
                results.append(fn(runs))
    if 4 in crit:
        results.append(criterion_4())
    if 6 in crit:
        results.append(criterion_6())
    if crit & {7, 8}:
        sruns = _sparse_runs()
        if 7 in crit:
            results.append(criterion_7(sruns))
        if 8 in crit:
            t0 = time.perf_counter()
            results.append(criterion_8(sruns))
            say(f"pipeline runs: {time.perf_counter() - t0:.1f}s")
    if crit & {9, 10}:
        table = benchmark_table(data_dir=data_dir, progress=say)
        if 9 in crit:
            results.append(criterion_9(table))
        if 10 in crit:
            results.append(criterion_10(table))
    results.sort(key=lambda r: r.id)
    return results


def report_json(results) -> str:
    doc = {"criteria": [{"id": r.id, "name": r.name, "passed": r.passed, "summary": r.summary,
                         "details": r.details} for r in results]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_text(results) -> str:
    return "".join(r.line() + "\n" for r in results)
