import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairclust.filtering import FilteringParams, abv_filtering, match_epsilon
from fairclust.instance import brute_force_opt
from fairclust.rounding import solve_lp1

from conftest import random_instance


def test_params():
    assert FilteringParams(0.5).max_centers(10) == 20
    assert FilteringParams(0.3).max_centers(10) == 15      # ceil(14.28..)
    assert FilteringParams(0.2).max_centers(4) == 5        # exactly 5, no float overshoot
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            FilteringParams(bad)


def test_all_facilities():
    inst = random_instance(0, n=7, nf=3, k=3, m=2)
    res = abv_filtering(inst, 0.3)
    assert len(res.centers) <= 3
    assert res.centers == tuple(sorted(int(f) for f in inst.facilities))
    assert res.lp_objective == pytest.approx(res.cost.objective)


@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 3), st.sampled_from([1.0, 2.0]),
       st.sampled_from([0.1, 0.3, 0.5, 0.9]))
def test_count_disjointness_and_envelope(seed, k, m, p, eps):
    inst = random_instance(seed, n=9, nf=6, k=k, m=m, p=p)
    res = abv_filtering(inst, eps)
    assert len(res.centers) <= FilteringParams(eps).max_centers(k)
    pos = [int(np.flatnonzero(inst.clients == c)[0]) for c in res.selected_clients]
    for a in pos:
        for b in pos:
            if a < b:
                d = inst.distance[inst.clients[a], inst.clients[b]]
                assert d > res.radii[a] + res.radii[b]
    opt = brute_force_opt(inst)[1].objective
    assert res.cost.objective <= 2 * (2 / eps) ** p * opt + 1e-9


def test_every_client_near_a_selected_ball():
    inst = random_instance(5, n=12, nf=6, k=2, m=2)
    res = abv_filtering(inst, 0.4)
    sel = [int(np.flatnonzero(inst.clients == c)[0]) for c in res.selected_clients]
    for i in range(inst.n):
        assert any(inst.distance[inst.clients[i], inst.clients[s]] <= res.radii[i] + res.radii[s]
                   for s in sel)


def test_shared_lp_gives_same_answer():
    inst = random_instance(6, n=10, nf=6, k=2, m=2)
    lp1 = solve_lp1(inst)
    assert abv_filtering(inst, 0.3, lp1=lp1).centers == abv_filtering(inst, 0.3).centers


def test_match_epsilon_rule():
    inst = random_instance(7, n=14, nf=8, k=3, m=2)
    best, runs = match_epsilon(inst, 4)
    assert [r.epsilon for r in runs] == [0.1, 0.2, 0.3, 0.4, 0.5]
    gap = min(abs(len(r.centers) - 4) for r in runs)
    tied = [r for r in runs if abs(len(r.centers) - 4) == gap]
    most = max(len(r.centers) for r in tied)
    assert best is min((r for r in tied if len(r.centers) == most), key=lambda r: r.epsilon)
