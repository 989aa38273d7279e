import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairclust.instance import (Group, Instance, InstanceError, OracleTooLarge, as_center_set,
                                brute_force_opt, euclidean_distances, evaluate, pad_centers)

from conftest import random_instance


def _line(points, clients, facilities, groups, k, p=1.0):
    d = euclidean_distances(np.asarray(points, dtype=float)[:, None])
    return Instance(d, clients, facilities, groups, k, p)


def test_line_metric_p2(line_instance):
    assert evaluate(line_instance, [2]).objective == pytest.approx(2.0)


def test_colocated_centers_cost_zero():
    inst = _line([0, 0, 5, 5], [0, 2], [1, 3], [Group.uniform([0, 2])], 2)
    prof = evaluate(inst, [1, 3])
    assert prof.per_group == (0.0,)
    assert prof.objective == 0.0


def test_identical_groups_equal_costs():
    inst = _line([0, 1, 3, 7], [0, 1, 2], [3], [Group.uniform([0, 1, 2])] * 2, 1)
    a, b = evaluate(inst, [3]).per_group
    assert a == b


def test_objective_is_max_of_groups():
    inst = _line([0, 1, 5], [0, 1, 2], [0, 1, 2], [Group.uniform([0, 1]), Group.uniform([2])], 1)
    prof = evaluate(inst, [0])
    assert prof.per_group == pytest.approx((0.5, 5.0))
    assert prof.objective == max(prof.per_group)
    assert evaluate(inst, [1, 2]).per_group == pytest.approx((0.5, 0.0))


def test_empty_centers_rejected(line_instance):
    with pytest.raises(InstanceError, match="no centers"):
        evaluate(line_instance, [])


def test_non_facility_center_rejected(line_instance):
    with pytest.raises(InstanceError):
        evaluate(line_instance, [0])


@pytest.mark.parametrize("dist,msg", [
    ([[0, 1], [1, 0], [0, 0]], "square"),
    ([[0, -1], [-1, 0]], "nonnegative"),
    ([[1, 1], [1, 0]], "must be 0"),
    ([[0, 1], [2, 0]], "symmetric"),
    ([[0, 1, 5], [1, 0, 1], [5, 1, 0]], "triangle"),
])
def test_bad_metric(dist, msg):
    n = len(dist)
    with pytest.raises(InstanceError, match=msg):
        Instance(dist, [0], list(range(min(n, 2))), [Group.uniform([0])], 1)


def test_triangle_check_can_be_disabled():
    d = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
    Instance(d, [0], [1, 2], [Group.uniform([0])], 1, check_metric=False)


@pytest.mark.parametrize("k", [0, 3])
def test_k_range(k):
    with pytest.raises(InstanceError, match="k must be"):
        _line([0, 1, 2], [0], [1, 2], [Group.uniform([0])], k)


def test_p_below_one():
    with pytest.raises(InstanceError, match="p must be"):
        _line([0, 1], [0], [1], [Group.uniform([0])], 1, p=0.5)


def test_group_validation():
    with pytest.raises(InstanceError, match="nonempty"):
        Group.uniform([])
    with pytest.raises(InstanceError, match="unknown client"):
        _line([0, 1], [0], [1], [Group.uniform([1])], 1)
    with pytest.raises(InstanceError, match="nonnegative"):
        _line([0, 1], [0], [1], [Group((0,), (-1.0,))], 1)


def test_default_weights_sum_to_one():
    inst = random_instance(0, n=9, m=3)
    assert np.allclose(inst.weights.sum(axis=1), 1.0)


def test_brute_force_forced_subset():
    inst = random_instance(1, n=5, nf=3, k=3)
    centers, _ = brute_force_opt(inst)
    assert centers == tuple(sorted(inst.facilities.tolist()))


def test_brute_force_zero_optimum():
    inst = _line([3, 3, 3, 0, 3, 9], [0, 1, 2], [3, 4, 5], [Group.uniform([0, 1, 2])], 1)
    centers, prof = brute_force_opt(inst)
    assert centers == (4,)
    assert prof.objective == 0


def test_brute_force_matches_reverse_enumeration():
    inst = random_instance(7, n=8, nf=6, k=2, m=2)
    _, prof = brute_force_opt(inst)
    fac = sorted(inst.facilities.tolist(), reverse=True)
    vals = [evaluate(inst, c).objective for c in itertools.combinations(fac, 2)]
    assert len(vals) == 15
    assert prof.objective == min(vals)


def test_brute_force_tie_break_is_lexicographic():
    # facilities 2 and 3 are both at distance 1 from the single client
    inst = _line([0, 5, 1, -1], [0], [1, 2, 3], [Group.uniform([0])], 1)
    assert brute_force_opt(inst)[0] == (2,)


def test_oracle_cap():
    inst = random_instance(2, n=4, nf=8, k=4)
    with pytest.raises(OracleTooLarge, match="too large for oracle"):
        brute_force_opt(inst, cap=10)


@given(st.integers(0, 10_000), st.integers(1, 3), st.sampled_from([1.0, 2.0]))
def test_brute_force_is_minimum(seed, k, p):
    inst = random_instance(seed, n=6, nf=5, k=k, m=2, p=p)
    _, prof = brute_force_opt(inst)
    for c in itertools.combinations(inst.facilities.tolist(), k):
        assert prof.objective <= evaluate(inst, c).objective


@given(st.integers(0, 10_000))
def test_single_group_is_plain_objective(seed):
    inst = random_instance(seed, n=7, nf=4, k=2, m=1, p=2.0)
    c = inst.facilities[:2]
    direct = sum(min(inst.distance[i, f] for f in c) ** 2 for i in inst.clients) / inst.n
    assert evaluate(inst, c).objective == pytest.approx(direct, rel=1e-12)


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_more_centers_never_cost_more(seed, extra):
    inst = random_instance(seed, n=7, nf=6, k=1, m=2)
    rng = np.random.default_rng(seed)
    order = rng.permutation(inst.facilities)
    small, big = order[:1], order[:1 + extra]
    assert evaluate(inst, big).objective <= evaluate(inst, small).objective


@given(st.integers(0, 10_000), st.floats(0.1, 10), st.sampled_from([1.0, 2.0, 3.0]))
def test_scale_covariance(seed, c, p):
    inst = random_instance(seed, n=6, nf=4, k=2, m=2, p=p)
    scaled = Instance(inst.distance * c, inst.clients, inst.facilities, inst.groups, inst.k, p,
                      check_metric=False)
    cen, prof = brute_force_opt(inst)
    cen2, prof2 = brute_force_opt(scaled)
    assert np.allclose(np.array(prof2.per_group), c ** p * np.array(prof.per_group), rtol=1e-9)
    assert evaluate(inst, cen2).objective == pytest.approx(prof.objective, rel=1e-9)


def test_json_roundtrip(tmp_path):
    inst = random_instance(3, overlap=True)
    path = tmp_path / "inst.json"
    inst.dump(path)
    back = Instance.load(path)
    assert np.array_equal(back.distance, inst.distance)
    assert back.groups == inst.groups
    assert (back.k, back.p) == (inst.k, inst.p)


def test_json_points_format():
    doc = {"points": [[0, 0], [3, 4], [6, 8]], "facilities": [1], "k": 1,
           "groups": [{"ids": [0, 2]}, {"ids": [1], "weights": [2.0]}]}
    inst = Instance.from_json(doc)
    assert inst.distance[0, 1] == pytest.approx(5.0)
    assert evaluate(inst, [1]).per_group == pytest.approx((5.0, 0.0))


def test_json_matrix_overrides_points():
    doc = {"points": [[0], [1]], "distance_matrix": [[0, 7], [7, 0]], "k": 1}
    assert Instance.from_json(doc).distance[0, 1] == 7


def test_json_missing_distances():
    with pytest.raises(InstanceError):
        Instance.from_json(json.loads('{"k": 1}'))


def test_pad_centers_grows_and_never_hurts():
    inst = random_instance(4, n=8, nf=6, k=3)
    base = (int(inst.facilities[0]),)
    padded = pad_centers(inst, base, 3)
    assert len(padded) == 3 and set(base) <= set(padded)
    assert evaluate(inst, padded).objective <= evaluate(inst, base).objective
    assert len(pad_centers(inst, base, 99)) == len(inst.facilities)


def test_as_center_set_canonical():
    assert as_center_set([3, 1, 3]) == (1, 3)
