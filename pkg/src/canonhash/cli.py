"""Command line entry point: bench runs, surveys, verification, plots.

``BENCH_SEED`` in the environment overrides ``--seed`` everywhere.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

from . import bench
from .lowerbound import scheme_assignment, verdict


def _seed(args) -> int:
    env = os.environ.get("BENCH_SEED")
    return int(env) if env is not None else args.seed


def _parse_mix(text: str):
    parts = [float(x) for x in text.split(":")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("mix must be insert:delete:lookup")
    total = sum(parts)
    if total <= 0:
        raise argparse.ArgumentTypeError("mix fractions must be positive")
    return tuple(p / total for p in parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canonhash",
        description="Concurrent canonical-layout hash set: benchmarks and checks")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="threaded workload on the atomic backend")
    run.add_argument("--m", type=int, default=1024)
    run.add_argument("--u", type=int, default=4096)
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--mix", type=_parse_mix, default=(0.2, 0.2, 0.6),
                     help="insert:delete:lookup fractions, e.g. 2:1:7")
    run.add_argument("--alpha", type=float, default=0.5)
    run.add_argument("--ops", type=int, default=10_000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--checkpoint-every", type=int, default=0,
                     help="ops per thread between quiescent samples")
    run.add_argument("--shared-keys", type=int, default=0,
                     help="all threads work on this many keys (contention)")
    run.add_argument("--out", default=None)
    run.add_argument("--format", choices=("csv", "json"), default="csv")

    survey = sub.add_parser("survey", help="run-length moments at a target load")
    survey.add_argument("--m", type=int, default=4096)
    survey.add_argument("--alpha", type=float, default=0.5)
    survey.add_argument("--seed", type=int, default=0)
    survey.add_argument("--samples", type=int, default=10_000)
    survey.add_argument("--out", default=None)
    survey.add_argument("--format", choices=("csv", "json"), default="json")

    ver = sub.add_parser("verify", help="schedule exploration and audits")
    ver.add_argument("--profile", choices=("quick", "deep"), default="quick")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--out", default=None,
                     help="replay JSON path on violation")

    lb = sub.add_parser("lb-verify", help="brute-force cell-width bound checks")
    lb.add_argument("--u", type=int, default=4)
    lb.add_argument("--m", type=int, default=3)
    lb.add_argument("--n", type=int, default=3)
    lb.add_argument("--scheme", default="agerule",
                    help="agerule | keyorder | custom-file:<path>")
    lb.add_argument("--seed", type=int, default=0)
    lb.add_argument("--out", default=None)

    plot = sub.add_parser("plot", help="static PNG charts from a bench CSV")
    plot.add_argument("csv")
    plot.add_argument("--out", default="bench.png")
    return parser


def _cmd_run(args) -> int:
    spec = bench.WorkloadSpec(
        m=args.m, u=args.u, threads=args.threads, mix=args.mix,
        alpha=args.alpha, ops=args.ops, seed=_seed(args),
        checkpoint_every=args.checkpoint_every, shared_keys=args.shared_keys)
    stats = bench.run_bench(spec)
    payload = bench.emit(stats.rows(), args.out, args.format)
    if not args.out:
        sys.stdout.write(payload)
    if stats.quiescent_failures:
        print("quiescent layout check FAILED", file=sys.stderr)
        return 1
    return 0


def _cmd_survey(args) -> int:
    result = bench.run_length_survey(args.m, args.alpha, _seed(args), args.samples)
    if args.format == "csv":
        rows = [("survey", "run_length_mean", result["mean"], "cells", result["seed"]),
                ("survey", "run_length_m3", result["m3"], "cells^3", result["seed"])]
        payload = bench.emit(rows, args.out, "csv")
    else:
        payload = json.dumps(result, indent=2) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(payload)
    if not args.out:
        sys.stdout.write(payload)
    return 0


def _cmd_verify(args) -> int:
    status = bench.verify(args.profile, seed=_seed(args), out_path=args.out)
    print(f"verify {args.profile}: {'ok' if status == 0 else 'VIOLATIONS'}")
    return status


def _cmd_lb_verify(args) -> int:
    if args.scheme.startswith("custom-file:"):
        path = args.scheme.split(":", 1)[1]
        with open(path) as fh:
            spec = json.load(fh)
        from .lowerbound import PriorityScheme
        orders = {int(k): v for k, v in spec["orders"].items()}

        def gt(x, y, i):
            order = orders[i]
            return order.index(x) < order.index(y)  # earlier means stronger

        scheme = PriorityScheme("custom", args.m, spec["hash_table"], gt)
    else:
        hash_table = [bench.HashConfig.seeded(args.m, args.u, _seed(args)).h(k)
                      for k in range(args.u)]
        scheme = bench.make_scheme(args.scheme, args.m, hash_table)
    result = verdict(args.u, args.m, args.n, scheme)
    payload = json.dumps(result, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)
    return 0


def _cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows: List[dict] = []
    with open(args.csv) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            rows.append(dict(zip(header, line.strip().split(","))))
    metrics = sorted({r["metric"] for r in rows})
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for metric in metrics:
        ys = [float(r["value"]) for r in rows if r["metric"] == metric]
        ax.plot(range(len(ys)), ys, marker="o", label=metric)
    ax.set_xlabel("row")
    ax.set_ylabel("value")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "survey": _cmd_survey, "verify": _cmd_verify,
                "lb-verify": _cmd_lb_verify, "plot": _cmd_plot}
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
