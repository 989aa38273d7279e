import csv
import io
import json

import pytest

from fairclust import bench
from fairclust.cli import main
from fairclust.instance import Instance, brute_force_opt, evaluate

from conftest import random_instance


@pytest.fixture
def inst_file(tmp_path):
    inst = random_instance(3, n=9, nf=6, k=2, m=3)
    path = tmp_path / "micro.json"
    inst.dump(path)
    return path


def _config(tmp_path, inst_file, algorithms=None, **kw):
    doc = {"source": {"instance": str(inst_file)}, "k_list": [1, 2, 3],
           "algorithms": algorithms or {"iterative_rounding": {"lambda": [0.3, 0.5]},
                                        "abv": {"epsilon": [0.2]},
                                        "best_k_subset_pipeline": {},
                                        "brute_force": {}}}
    doc.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return p


def _rows(path):
    return list(csv.reader(io.StringIO(path.read_text())))


def test_run_writes_expected_rows(tmp_path, inst_file):
    cfg = _config(tmp_path, inst_file)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    rows = _rows(out / "results.csv")
    assert rows[0] == ["dataset", "algorithm", "k", "params", "group_costs", "objective",
                       "num_centers", "runtime_ms"]
    body = rows[1:]
    assert len(body) == 3 * (2 + 1 + 1 + 1)
    inst = Instance.load(inst_file)
    for r in body:
        k, m = int(r[2]), inst.m
        costs = [float(c) for c in r[4].split(";")]
        assert len(costs) == m and float(r[5]) == max(costs)
        assert float(r[7]) >= 0
        n = int(r[6])
        if r[1] == "iterative_rounding":
            assert n <= k + m
        elif r[1] in ("best_k_subset_pipeline", "brute_force"):
            assert n == k
        if r[1] == "brute_force":
            assert float(r[5]) == brute_force_opt(inst.with_k(k))[1].objective
    assert (out / "micro_objective.svg").read_text().startswith("<svg")


def test_rows_evaluate_consistently(tmp_path, inst_file):
    cfg = bench.ExperimentConfig.read(_config(tmp_path, inst_file))
    report = bench.run(cfg)
    inst = Instance.load(inst_file)
    for r in report.rows:
        prof = evaluate(inst.with_k(r.k), r.centers)
        assert r.objective == prof.objective and r.group_costs == prof.per_group
    # order is k first, then algorithm, then parameters
    assert [r.k for r in report.rows] == sorted(r.k for r in report.rows)


def test_no_timing_is_byte_identical(tmp_path, inst_file):
    cfg = _config(tmp_path, inst_file)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(a), "--no-timing"]) == 0
    assert main(["run", str(cfg), "--out", str(b), "--no-timing", "--threads", "2"]) == 0
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    assert all(r[7] == "" for r in _rows(a / "results.csv")[1:])


def test_sparse_pipeline_row(tmp_path):
    inst = random_instance(1, n=6, nf=4, k=2, m=1)
    path = tmp_path / "s.json"
    inst.dump(path)
    cfg = _config(tmp_path, path, {"sparse_pipeline": {}, "brute_force": {}}, k_list=[2])
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    rows = {r[1]: r for r in _rows(out / "results.csv")[1:]}
    assert "t=1" in rows["sparse_pipeline"][3] and int(rows["sparse_pipeline"][6]) <= 2


def test_trace_and_lp_dump(tmp_path, inst_file):
    cfg = _config(tmp_path, inst_file, {"iterative_rounding": {}}, k_list=[2])
    out, lpdir = tmp_path / "out", tmp_path / "lps"
    try:
        assert main(["run", str(cfg), "--out", str(out), "--trace", "--dump-lp", str(lpdir)]) == 0
    finally:
        from fairclust.lp import set_lp_dump
        set_lp_dump(None)
    traces = list((out / "traces").glob("*.jsonl"))
    assert len(traces) == 1 and json.loads(traces[0].read_text().splitlines()[0])["iteration"] == 0
    assert list(lpdir.glob("*.lp"))


def test_failed_row_sets_exit_code(tmp_path):
    inst = random_instance(0, n=30, nf=30, k=2)
    path = tmp_path / "big.json"
    inst.dump(path)
    # 30 choose 15 subsets is over the brute-force cap
    cfg = _config(tmp_path, path, {"brute_force": {}}, k_list=[15])
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 1
    row = _rows(out / "results.csv")[1]
    assert "error=" in row[3] and row[5] == ""


@pytest.mark.parametrize("doc", [
    {"k_list": [1], "algorithms": {}},
    {"source": {"instance": "x.json"}, "k_list": [0], "algorithms": {}},
    {"source": {"instance": "x.json"}, "k_list": [1], "algorithms": {"kmeans": {}}},
    {"source": {"instance": "x.json"}, "k_list": [1], "algorithms": {}, "colour": "red"},
])
def test_config_errors(tmp_path, doc):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 2


def test_k_too_large(tmp_path, inst_file):
    cfg = _config(tmp_path, inst_file, k_list=[50])
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_oracle_command(tmp_path, inst_file, capsys):
    assert main(["oracle", str(inst_file)]) == 0
    doc = json.loads(capsys.readouterr().out)
    centers, prof = brute_force_opt(Instance.load(inst_file))
    assert doc["centers"] == list(centers) and doc["objective"] == prof.objective
    assert main(["oracle", str(inst_file), "--cap", "1"]) == 1
    assert main(["oracle", str(tmp_path / "missing.json")]) == 1


def test_accept_subset(tmp_path, capsys):
    out = tmp_path / "acc"
    assert main(["accept", "--criteria", "1,4", "--out", str(out)]) == 0
    text = (out / "report.txt").read_text()
    assert text.count("[PASS]") == 2
    doc = json.loads((out / "report.json").read_text())
    assert [c["id"] for c in doc["criteria"]] == [1, 4]
