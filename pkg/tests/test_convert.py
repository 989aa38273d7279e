import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairclust.acceptance import sparse_micro_instance
from fairclust.convert import (ConversionConfig, ConversionError, MinMaxAssignmentProblem,
                               SubproblemTooLarge, best_k_subset, convert,
                               convert_with_beta_search, minmax_assign, opt_guess_grid, prune)
from fairclust.instance import brute_force_opt, evaluate
from fairclust.rounding import DEFAULT_LAMBDA, approximation_factor, iterative_round
from fairclust.sparsify import enumerate_instances

from conftest import random_instance


# -- best_k_subset ------------------------------------------------------------------

def test_subset_identity_when_small():
    inst = random_instance(0, n=6, nf=5, k=3)
    S = tuple(sorted(int(f) for f in inst.facilities[:3]))
    assert best_k_subset(inst, S) == S


@given(st.integers(0, 10_000), st.integers(1, 3), st.sampled_from([1.0, 2.0]))
def test_subset_matches_direct_enumeration(seed, k, p):
    inst = random_instance(seed, n=8, nf=7, k=k, m=2, p=p)
    S = [int(f) for f in inst.facilities[:k + 2]]
    vals = {c: evaluate(inst, c).objective for c in itertools.combinations(sorted(S), k)}
    best = min(vals.values())
    got = best_k_subset(inst, S)
    assert vals[got] == pytest.approx(best, abs=1e-12)
    assert got == min(c for c, v in vals.items() if v <= best + 1e-12)


@given(st.integers(0, 10_000), st.integers(1, 3), st.sampled_from([1.0, 2.0]))
def test_subset_beats_nearest_member_witness(seed, k, p):
    inst = random_instance(seed, n=9, nf=7, k=k, m=2, p=p)
    S = [int(f) for f in inst.facilities[1:k + 3]]
    opt, prof = brute_force_opt(inst)
    witness = {S[int(np.argmin(inst.distance[o, S]))] for o in opt}
    val_S = evaluate(inst, S).objective
    got = evaluate(inst, best_k_subset(inst, S)).objective
    assert got <= evaluate(inst, witness).objective + 1e-12
    # d(i, witness) <= 2 d(i, OPT) + d(i, S), then convexity of x^p
    assert got <= 2 ** (p - 1) * (2 ** p * prof.objective + val_S) + 1e-9


def test_subset_cap():
    inst = random_instance(0, n=6, nf=8, k=3)
    with pytest.raises(ConversionError):
        best_k_subset(inst, inst.facilities, cap=5)


# -- minmax selection ---------------------------------------------------------------

def _brute_minmax(prob):
    return min(prob.value(c) for c in itertools.product(*(range(len(p)) for p in prob.parts)))


def _random_problem(seed, k, m, size):
    rng = np.random.default_rng(seed)
    parts, costs, nxt = [], [], 0
    for _ in range(k):
        s = int(rng.integers(1, size + 1))
        parts.append(tuple(range(nxt, nxt + s)))
        nxt += s
        costs.append(rng.random((m, s)))
    return MinMaxAssignmentProblem(tuple(parts), tuple(costs))


def test_minmax_single_row_exact():
    prob = _random_problem(1, 5, 1, 4)
    res = minmax_assign(prob, 0.5)
    assert res.value == pytest.approx(_brute_minmax(prob))


def test_minmax_all_equal():
    prob = MinMaxAssignmentProblem(((0, 1), (2, 3), (4,)),
                                   tuple(np.full((2, n), 0.5) for n in (2, 2, 1)))
    assert minmax_assign(prob, 0.5).value == pytest.approx(3 * 0.5)


@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(2, 3), st.sampled_from([0.5, 0.9, 2.0]))
def test_minmax_approximation(seed, k, m, eps):
    prob = _random_problem(seed, k, m, 3)
    res = minmax_assign(prob, eps)
    assert res.max_fractional_parts <= m
    assert res.value == pytest.approx(prob.value(res.positions))
    assert res.value <= (1 + eps) * _brute_minmax(prob) + 1e-9
    assert all(prob.parts[j][v] == s for j, (v, s) in enumerate(zip(res.positions, res.selection)))


def test_minmax_budget():
    prob = _random_problem(2, 8, 3, 5)
    with pytest.raises(SubproblemTooLarge, match="subproblem too large"):
        minmax_assign(prob, 0.1, budget=10)


@pytest.mark.parametrize("parts,costs", [
    (((0,), (0,)), (np.ones((1, 1)), np.ones((1, 1)))),
    (((0,), ()), (np.ones((1, 1)), np.ones((1, 0)))),
    (((0, 1),), (np.ones((1, 3)),)),
    (((0,), (1,)), (np.ones((1, 1)), np.ones((2, 1)))),
    (((0,),), (-np.ones((1, 1)),)),
])
def test_minmax_validation(parts, costs):
    with pytest.raises(ValueError):
        MinMaxAssignmentProblem(parts, costs)


def test_minmax_bad_epsilon():
    with pytest.raises(ValueError):
        minmax_assign(_random_problem(0, 2, 2, 2), 0)


# -- conversion ------------------------------------------------------------------------

def test_config_theory_flags():
    cfg = ConversionConfig()
    assert cfg.delta_bound() == pytest.approx(min(1 / 8, math.log(1.9) / 12))
    assert not cfg.theory_conditions_met(1.0)
    big = ConversionConfig(delta=0.05, t=math.ceil(4 * (1 + 3 / 0.05)))
    assert big.theory_conditions_met(1.0)
    for bad in (dict(epsilon_prime=0), dict(delta=1.0), dict(t=0)):
        with pytest.raises(ValueError):
            ConversionConfig(**bad)


def test_beta_formula():
    inst = random_instance(0, n=6, nf=4, k=2, m=2)
    cfg = ConversionConfig(delta=0.5, t=3)
    assert cfg.beta_for(inst, 1.0, 2.0) == pytest.approx(2 / 6 * (1 + 7 * 2))


def test_prune_lowest_id_first():
    inst = random_instance(0, n=6, nf=5, k=2, m=1)
    fac = [int(f) for f in inst.facilities]
    # huge beta: every removal allowed, the lowest ids go first
    assert prune(inst, fac, 1e9) == fac[-2:]
    assert prune(inst, fac, -1.0) == fac


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_prune_stops_at_k_and_respects_beta(seed, k):
    inst = random_instance(seed, n=8, nf=6, k=k, m=2)
    T = [int(f) for f in inst.facilities[:k + 2]]
    beta = 0.05
    out = prune(inst, T, beta)
    assert len(out) >= min(k, len(T)) and set(out) <= set(T)
    # each removal raised the cost by at most beta
    assert evaluate(inst, out).objective <= evaluate(inst, T).objective + (len(T) - len(out)) * beta + 1e-12


def test_early_exit():
    inst = random_instance(1, n=6, nf=5, k=2, m=2)
    res = convert(inst, [int(inst.facilities[0])], ConversionConfig(beta=0.0))
    assert res.path == "early-exit" and len(res.centers) == 2


def test_beta_required():
    inst = random_instance(1, n=6, nf=5, k=2, m=2)
    with pytest.raises(ValueError):
        convert(inst, inst.facilities, ConversionConfig())


@pytest.mark.parametrize("seed", range(6))
def test_enumeration_reaches_optimum(seed):
    # with nothing pruned and k < m^2 t, V ranges over all k-subsets
    inst = random_instance(seed, n=7, nf=5, k=2, m=2)
    T = [int(f) for f in inst.facilities[:4]]
    res = convert(inst, T, ConversionConfig(beta=-1.0))
    assert res.path == "enumeration" and not res.pruned
    assert len(res.centers) == inst.k
    assert res.cost.objective == pytest.approx(brute_force_opt(inst)[1].objective)
    doc = json.loads(res.to_json())
    assert doc["path"] == "enumeration" and doc["pairs_tried"] == res.pairs_tried


def test_enumeration_with_balls():
    inst = random_instance(3, n=7, nf=6, k=3, m=1)
    T = [int(f) for f in inst.facilities[:4]]
    res = convert(inst, T, ConversionConfig(beta=-1.0, delta=0.5))
    assert len(res.centers) == 3 and res.pairs_tried > 0


def test_pair_cap_truncates():
    inst = random_instance(0, n=7, nf=5, k=2, m=2)
    res = convert(inst, inst.facilities[:4], ConversionConfig(beta=-1.0, pair_cap=3))
    assert res.truncated and res.pairs_tried == 3


def test_guess_grid():
    inst = random_instance(0, n=6, nf=4, k=2, m=2)
    g = opt_guess_grid(inst, 1.0)
    assert g[0] == 0.0 and all(b == 2 * a for a, b in zip(g[1:], g[2:]))
    assert g[-1] >= 1.0
    assert opt_guess_grid(inst, 0.0) == [0.0]


def test_beta_search_zero_cost():
    inst = random_instance(2, n=6, nf=4, k=4, m=2)
    res = convert_with_beta_search(inst, inst.facilities, ConversionConfig())
    assert res.cost.objective == pytest.approx(evaluate(inst, inst.facilities).objective)
    assert res.extra["beta_grid"]


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_never_more_than_k(seed, k):
    inst = random_instance(seed, n=7, nf=6, k=k, m=2)
    T = iterative_round(inst).centers
    res = convert_with_beta_search(inst, T, ConversionConfig())
    assert len(res.centers) <= k
    assert res.cost.objective == pytest.approx(evaluate(inst, res.centers).objective)


@pytest.mark.parametrize("seed", range(4))
def test_pipeline_bound_on_sparse_micro(seed):
    inst = sparse_micro_instance(seed)
    opt = brute_force_opt(inst)[1].objective
    cfg = ConversionConfig(0.9, 0.05, 1)
    best = math.inf
    for cand in enumerate_instances(inst, 1, unique=True):
        ps = iterative_round(cand.instance, DEFAULT_LAMBDA)
        res = convert_with_beta_search(cand.instance, ps.centers, cfg)
        best = min(best, evaluate(inst, res.centers).objective)
    assert best <= (approximation_factor(DEFAULT_LAMBDA, 1) + 0.5) * opt + 1e-12
