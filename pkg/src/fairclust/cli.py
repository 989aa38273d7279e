"""Command line: ``fairclust run|oracle|accept``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import acceptance, bench
from .instance import Instance, InstanceError, OracleTooLarge, brute_force_opt
from .lp import set_lp_dump

log = logging.getLogger("fairclust")


def _cmd_run(args) -> int:
    try:
        cfg = bench.ExperimentConfig.read(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    if args.dump_lp:
        set_lp_dump(args.dump_lp)
    try:
        report = bench.run(cfg, threads=args.threads,
                           trace_dir=str(out / "traces") if args.trace else None)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    paths = bench.write_outputs(report, out, cfg, timing=not args.no_timing)
    for r in report.failed:
        print(f"row failed: {r.algorithm} k={r.k} {r.params_str()}", file=sys.stderr)
    print(f"{len(report.rows)} rows, {len(report.failed)} failed -> {', '.join(map(str, paths))}")
    return 1 if report.failed else 0


def _cmd_oracle(args) -> int:
    try:
        inst = Instance.load(args.instance)
        centers, prof = brute_force_opt(inst, cap=args.cap)
    except (OSError, ValueError, InstanceError, OracleTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"centers": list(centers), **prof.as_dict()}, indent=2))
    return 0


def _cmd_accept(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    criteria = [int(c) for c in args.criteria.split(",")] if args.criteria else acceptance.ALL_CRITERIA

    def say(msg):
        print(msg, file=sys.stderr, flush=True)

    t0 = time.perf_counter()
    results = acceptance.run_acceptance(criteria, data_dir=args.data_dir, progress=say)
    first = acceptance.report_json(results)
    if args.twice:
        say(f"first pass done in {time.perf_counter() - t0:.0f}s; running again")
        second = acceptance.report_json(
            acceptance.run_acceptance(criteria, data_dir=args.data_dir, progress=say))
        same = first == second
        results.append(acceptance.CriterionResult(
            11, "determinism", same,
            "two runs gave byte-identical reports" if same else "reports differ between runs",
            {"bytes": len(first.encode())}))
        (out / "report_rerun.json").write_text(second)
    (out / "report.json").write_text(acceptance.report_json(results))
    text = acceptance.report_text(results)
    (out / "report.txt").write_text(text)
    sys.stdout.write(text)
    say(f"total {time.perf_counter() - t0:.0f}s")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fairclust",
                                 description="Socially fair (l_p, k)-clustering solvers and benchmarks.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep from a JSON config")
    run.add_argument("config")
    run.add_argument("--out", default="bench-out")
    run.add_argument("--threads", type=int, default=1, help="worker processes (one per k)")
    run.add_argument("--trace", action="store_true", help="write per-iteration rounding traces")
    run.add_argument("--dump-lp", metavar="DIR", help="write every solved LP in LP format")
    run.add_argument("--no-timing", action="store_true",
                     help="leave runtime_ms empty so reruns give identical CSV bytes")
    run.set_defaults(func=_cmd_run)

    orc = sub.add_parser("oracle", help="exact optimum of a small instance by enumeration")
    orc.add_argument("instance")
    orc.add_argument("--cap", type=int, default=2_000_000, help="max number of k-subsets")
    orc.set_defaults(func=_cmd_oracle)

    acc = sub.add_parser("accept", help="run the acceptance suite")
    acc.add_argument("--out", default="accept-out")
    acc.add_argument("--criteria", help="comma-separated subset of 1..10")
    acc.add_argument("--data-dir", help="directory holding the dataset files (default ./data)")
    acc.add_argument("--twice", action="store_true",
                     help="run everything a second time and compare reports (criterion 11)")
    acc.set_defaults(func=_cmd_accept)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
