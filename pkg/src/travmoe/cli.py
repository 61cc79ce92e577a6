"""Command line entry point: ``travmoe {run,verify,gen,bench}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .grid import GridDims
from .harness import (
    default_specs,
    emit_csv,
    load_specs,
    run_scenarios,
    verify_proposition,
)
from .world import DOMAINS, generate_world, save_world

PLANNERS = ("primitive", "graph")


def _specs(args):
    return load_specs(args.spec) if args.spec else default_specs()


def cmd_run(args) -> int:
    report = run_scenarios(_specs(args), base_seed=args.seed, planner_kind=args.planner, epsilon=args.epsilon)
    mpath, tpath = emit_csv(report, args.out)
    agg = report.aggregates()
    ok, bad = report.bound_checks
    print(f"{len(report.rows)} scenarios, {len(report.failures)} failed -> {mpath}, {tpath}")
    for k, v in agg.items():
        print(f"  mean {k:<18} {v:.6g}")
    print(f"  delta bound held in {ok}/{ok + bad} scenarios")
    for sid, msg in report.failures:
        print(f"  FAILED {sid}: {msg}", file=sys.stderr)
    return 1 if report.failures else 0


def cmd_verify(args) -> int:
    planners = (args.planner,) if args.planner else PLANNERS
    report = verify_proposition(args.trials, seed=args.seed, planners=planners)
    for kind, t in report.tallies.items():
        print(
            f"{kind:<9} checks={t.checks} bound={t.violations_bound} monotonic={t.violations_monotonic} "
            f"ordering={t.violations_ordering} nesting={t.violations_nesting} "
            f"early_stop={t.violations_early_stop} max_gap_ratio={t.max_observed_gap:.6f} "
            f"infinite_deltas={t.infinite_deltas}"
        )
    print(f"total violations: {report.total_violations}")
    return 1 if report.total_violations else 0


def cmd_gen(args) -> int:
    profiles = [args.profile] if args.profile else [d.value for d in DOMAINS]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for p in profiles:
        world = generate_world(args.seed, p, GridDims(args.height, args.width))
        path = out / f"world_{p}_{args.seed}.yaml"
        save_world(world, path)
        print(path)
    return 0


def cmd_bench(args) -> int:
    report = run_scenarios(_specs(args), base_seed=args.seed, planner_kind=args.planner, epsilon=args.epsilon)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for domain in sorted({r.domain for r in report.rows}):
        rs = [r for r in report.rows if r.domain == domain]
        rows.append((domain, rs))
    rows.append(("all", report.rows))
    header = ("domain", "scenarios", "flops_lazy", "flops_full", "savings_fraction", "q_p_lazy", "q_p_full", "experts_activated")
    path = out / "bench.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        print(" ".join(f"{h:>18}" for h in header))
        for domain, rs in rows:
            if not rs:
                continue
            vals = (
                domain,
                len(rs),
                np.mean([r.metrics.flops_used for r in rs]),
                np.mean([r.metrics.flops_full for r in rs]),
                np.mean([r.metrics.savings_fraction for r in rs]),
                np.mean([r.metrics.q_p for r in rs]),
                np.mean([r.q_p_full for r in rs]),
                np.mean([r.metrics.experts_activated for r in rs]),
            )
            w.writerow([vals[0], vals[1]] + [repr(float(v)) for v in vals[2:]])
            print(" ".join(f"{v:>18}" if isinstance(v, (str, int)) else f"{v:>18.4f}" for v in vals))
    print(path)
    return 1 if report.failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="travmoe", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spec=True):
        if spec:
            p.add_argument("--spec", help="scenario YAML file (default: built-in suite)")
            p.add_argument("--epsilon", type=float, help="override the termination threshold")
            p.add_argument("--planner", choices=PLANNERS, default="primitive")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out")

    p = sub.add_parser("run", help="run a scenario batch and write metrics.csv / trace.csv")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="randomized sweep of the path-cost bound")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--planner", choices=PLANNERS, help="check one planner (default: both)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="write generated world files")
    common(p, spec=False)
    p.add_argument("--profile", choices=[d.value for d in DOMAINS])
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=32)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="compute-savings table, lazy gating vs all experts")
    common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
