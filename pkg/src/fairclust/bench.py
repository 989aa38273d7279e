"""Experiment sweeps: algorithms x parameters x k on one instance source."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .convert import ConversionConfig, best_k_subset, convert_with_beta_search
from .datasets import DatasetSpec, builtin_spec, load
from .filtering import FilteringParams, abv_filtering
from .instance import Instance, brute_force_opt, evaluate
from .rounding import iterative_round, solve_lp1
from .sparsify import enumerate_instances
from . import svg

log = logging.getLogger(__name__)

CSV_HEADER = ["dataset", "algorithm", "k", "params", "group_costs", "objective",
              "num_centers", "runtime_ms"]
ALGORITHMS = ("iterative_rounding", "abv", "best_k_subset_pipeline", "sparse_pipeline",
              "brute_force")
# algorithms that start from the assignment LP
_USES_LP1 = {"iterative_rounding", "abv", "best_k_subset_pipeline"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Parsed run configuration.

    ``source`` is one of {"dataset": name}, {"spec": path} or {"instance": path}.
    ``algorithms`` maps algorithm name to its parameter grid, e.g.
    {"iterative_rounding": {"lambda": [0.3]}, "abv": {"epsilon": [0.1, 0.5]}}.
    """
    source: dict
    k_list: list[int]
    algorithms: dict
    p: float = 1.0
    name: Optional[str] = None
    data_dir: Optional[str] = None
    lp_method: str = "auto"
    plots: bool = True

    @classmethod
    def from_json(cls, doc: dict, base_dir: Path = Path(".")) -> "ExperimentConfig":
        doc = dict(doc)
        if "source" not in doc:
            raise ConfigError("config needs 'source'")
        src = dict(doc["source"])
        for key in ("spec", "instance"):
            if key in src and not Path(src[key]).is_absolute():
                src[key] = str(base_dir / src[key])
        doc["source"] = src
        unknown = set(doc.get("algorithms", {})) - set(ALGORITHMS)
        if unknown:
            raise ConfigError(f"unknown algorithms {sorted(unknown)}; choose from {ALGORITHMS}")
        try:
            cfg = cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        if not cfg.k_list or any(int(k) != k or k < 1 for k in cfg.k_list):
            raise ConfigError("k_list must hold positive integers")
        return cfg

    @classmethod
    def read(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_json(json.loads(path.read_text()), path.parent)

    def dataset_name(self) -> str:
        if self.name:
            return self.name
        src = self.source
        if "dataset" in src:
            return src["dataset"]
        return Path(src.get("spec") or src.get("instance")).stem

    def load_instance(self) -> Instance:
        src = self.source
        k0 = min(self.k_list)
        if "dataset" in src:
            return load(builtin_spec(src["dataset"]), k=k0, p=self.p, root=self.data_dir)
        if "spec" in src:
            return load(DatasetSpec.read(src["spec"]), k=k0, p=self.p, root=self.data_dir)
        if "instance" in src:
            inst = Instance.load(src["instance"])
            return inst.with_k(k0) if self.p == inst.p else Instance(
                inst.distance, inst.clients, inst.facilities, inst.groups, k0, self.p,
                check_metric=False)
        raise ConfigError("source needs 'dataset', 'spec' or 'instance'")

    def param_grid(self, algorithm: str) -> list[dict]:
        grid = self.algorithms.get(algorithm) or {}
        if algorithm in ("iterative_rounding", "best_k_subset_pipeline", "sparse_pipeline"):
            lams = grid.get("lambda", [0.3])
            extra = {}
            if algorithm == "sparse_pipeline":
                extra = {"t": grid.get("t", 1), "delta": grid.get("delta", 0.05),
                         "epsilon_prime": grid.get("epsilon_prime", 0.9)}
            return [{"lambda": float(l), **extra} for l in lams]
        if algorithm == "abv":
            return [{"epsilon": float(e)} for e in grid.get("epsilon", [0.1, 0.2, 0.3, 0.4, 0.5])]
        return [{}]


@dataclass
class Row:
    dataset: str
    algorithm: str
    k: int
    params: dict
    centers: tuple = ()
    group_costs: tuple = ()
    objective: Optional[float] = None
    runtime_ms: float = 0.0
    error: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @property
    def num_centers(self) -> int:
        return len(self.centers)

    def params_str(self) -> str:
        parts = [f"{k}={v}" for k, v in self.params.items()]
        if self.error:
            parts.append(f"error={self.error}")
        return ";".join(parts)

    def csv_fields(self, timing: bool = True) -> list:
        return [self.dataset, self.algorithm, self.k, self.params_str(),
                ";".join(repr(float(c)) for c in self.group_costs),
                "" if self.objective is None else repr(float(self.objective)),
                self.num_centers,
                (f"{self.runtime_ms:.1f}" if timing else "")]


@dataclass
class ExperimentReport:
    rows: list[Row]

    @property
    def failed(self) -> list[Row]:
        return [r for r in self.rows if r.error is not None]

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_fields(timing))
        return buf.getvalue()


def _run_one_k(cfg: ExperimentConfig, inst: Instance, k: int, trace_dir: Optional[str]) -> list[Row]:
    name = cfg.dataset_name()
    inst = inst.with_k(k)
    rows = []
    lp1, lp1_ms, lp1_err = None, 0.0, None
    if _USES_LP1 & set(cfg.algorithms):
        t0 = time.perf_counter()
        try:
            lp1 = solve_lp1(inst, cfg.lp_method)
        except Exception as exc:  # recorded per row below
            lp1_err = f"{type(exc).__name__}: {exc}"
        lp1_ms = (time.perf_counter() - t0) * 1000

    for algo in ALGORITHMS:
        if algo not in cfg.algorithms:
            continue
        for params in cfg.param_grid(algo):
            row = Row(name, algo, k, params)
            rows.append(row)
            if algo in _USES_LP1 and lp1_err:
                row.error = lp1_err
                continue
            t0 = time.perf_counter()
            try:
                centers = _solve(algo, inst, params, lp1, cfg.lp_method, trace_dir, name)
                prof = evaluate(inst, centers)
                row.centers, row.group_costs, row.objective = centers, prof.per_group, prof.objective
                _check_row_bound(row, inst)
            except Exception as exc:
                row.error = f"{type(exc).__name__}: {exc}"
            # rows built on the LP relaxation are charged its solve time
            row.runtime_ms = (time.perf_counter() - t0) * 1000 + (lp1_ms if algo in _USES_LP1 else 0)
    return rows


def _solve(algo, inst, params, lp1, method, trace_dir, name):
    if algo == "iterative_rounding":
        ps = iterative_round(inst, params["lambda"], method, lp1=lp1, check_invariants=False,
                             trace=trace_dir is not None)
        if trace_dir is not None:
            ps.write_trace(Path(trace_dir) / f"{name}_k{inst.k}_lambda{params['lambda']}.jsonl")
        return ps.centers
    if algo == "best_k_subset_pipeline":
        ps = iterative_round(inst, params["lambda"], method, lp1=lp1, check_invariants=False)
        return best_k_subset(inst, ps.centers)
    if algo == "abv":
        return abv_filtering(inst, FilteringParams(params["epsilon"]), lp1=lp1).centers
    if algo == "brute_force":
        return brute_force_opt(inst)[0]
    if algo == "sparse_pipeline":
        conv = ConversionConfig(params["epsilon_prime"], params["delta"], int(params["t"]))
        best = None
        for cand in enumerate_instances(inst, conv.t, unique=True):
            ps = iterative_round(cand.instance, params["lambda"], method, check_invariants=False)
            res = convert_with_beta_search(cand.instance, ps.centers, conv, method=method)
            key = (evaluate(inst, res.centers).objective, res.centers)
            if best is None or key < best:
                best = key
        if best is None:
            raise RuntimeError("no sparsified candidate")
        return best[1]
    raise ConfigError(f"unknown algorithm {algo}")


def _check_row_bound(row: Row, inst: Instance) -> None:
    n = row.num_centers
    if row.algorithm == "iterative_rounding" and n > inst.k + inst.m:
        raise AssertionError(f"{n} centers > k+m")
    if row.algorithm == "abv" and n > FilteringParams(row.params["epsilon"]).max_centers(inst.k):
        raise AssertionError(f"{n} centers > ceil(k/(1-eps))")
    if row.algorithm in ("best_k_subset_pipeline", "brute_force", "sparse_pipeline") and n > inst.k:
        raise AssertionError(f"{n} centers > k")


def run(cfg: ExperimentConfig, threads: int = 1, trace_dir=None) -> ExperimentReport:
    """All rows in config order (k, then algorithm, then parameters)."""
    for k in cfg.k_list:
        if k < 1:
            raise ConfigError("k must be positive")
    inst = cfg.load_instance()
    bad = [k for k in cfg.k_list if k > len(inst.facilities)]
    if bad:
        raise ConfigError(f"k values {bad} exceed the {len(inst.facilities)} facilities")
    if trace_dir is not None:
        Path(trace_dir).mkdir(parents=True, exist_ok=True)
    if threads <= 1:
        chunks = [_run_one_k(cfg, inst, k, trace_dir) for k in cfg.k_list]
    else:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            futs = [ex.submit(_run_one_k, cfg, inst, k, trace_dir) for k in cfg.k_list]
            chunks = [f.result() for f in futs]
    return ExperimentReport([r for ch in chunks for r in ch])


def write_outputs(report: ExperimentReport, out_dir, cfg: ExperimentConfig,
                  timing: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "results.csv"]
    paths[0].write_text(report.to_csv(timing))
    if cfg.plots:
        ok = [r for r in report.rows if r.error is None]
        if ok:
            p = out / f"{cfg.dataset_name()}_objective.svg"
            p.write_text(svg.objective_chart(ok, title=f"{cfg.dataset_name()}: objective vs k"))
            paths.append(p)
    return paths
