"""Command-line interface.

Subcommands: solve one instance, run a sweep plan, emit bound curves, run the
acceptance suite, or benchmark method running times. Exit codes: 0 success,
1 invalid configuration, 2 acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import alternating, barrier, bounds, harness, special_case
from .model import RicianParams, SystemDims, sample_channels


def _parse_b(text):
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ris-multicast",
        description="Max-min capacity of an RIS-assisted multicast channel")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one random instance")
    ps.add_argument("--m", type=int, default=4)
    ps.add_argument("--n", type=int, default=4)
    ps.add_argument("--k", type=int, default=2)
    ps.add_argument("--b", type=_parse_b, default=1.0, help="Rician factor (or 'inf')")
    ps.add_argument("--rho-db", type=float, default=20.0)
    ps.add_argument("--p-max", type=float, default=None, help="overrides --rho-db")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--method", default="alternating",
                    choices=["alternating", "barrier", "special_case", "auto"])
    ps.add_argument("--out", default=None, help="write the report JSON here")

    pw = sub.add_parser("sweep", help="run an experiment plan")
    pw.add_argument("--config", required=True, help="plan JSON path")
    pw.add_argument("--seed", type=int, default=None, help="override base_seed")
    pw.add_argument("--workers", type=int, default=None)
    pw.add_argument("--method", default=None, help="comma list overriding methods")
    pw.add_argument("--out", default=None, help="CSV output path")

    pb = sub.add_parser("bounds", help="emit asymptotic bound curves as CSV")
    pb.add_argument("--kind", required=True, choices=bounds.KINDS)
    pb.add_argument("--axis", required=True,
                    choices=["M", "N", "K", "B", "p_max", "K_equals_M"])
    pb.add_argument("--values", required=True, help="comma-separated axis values")
    pb.add_argument("--m", type=int, default=8)
    pb.add_argument("--n", type=int, default=8)
    pb.add_argument("--k", type=int, default=4)
    pb.add_argument("--b", type=_parse_b, default=1.0)
    pb.add_argument("--p-max", type=float, default=100.0)
    pb.add_argument("--l", type=float, default=None)
    pb.add_argument("--out", default=None)

    pv = sub.add_parser("verify", help="run the acceptance criteria")
    pv.add_argument("--fast", action="store_true",
                    help="reduced trial counts (smoke check, not the gate)")
    pv.add_argument("--criteria", default=None,
                    help="comma list of criterion numbers, e.g. 1,3,12")

    pt = sub.add_parser("bench", help="per-method wall-time report")
    pt.add_argument("--config", required=True)
    pt.add_argument("--out", default=None)
    return p


def _cmd_solve(args) -> int:
    dims = SystemDims(M=args.m, N=args.n, K=args.k)
    params = RicianParams(B=args.b, seed=args.seed)
    ch = sample_channels(dims, params)
    p_max = args.p_max if args.p_max is not None else 10.0 ** (args.rho_db / 10.0)

    method = args.method
    report = None
    if method in ("special_case", "auto"):
        res = special_case.detect_and_solve(ch, p_max, seed=args.seed)
        if res is not None:
            from .objective import all_snrs
            snrs = all_snrs(res.Q, res.theta, ch)
            from .report import SolveReport
            report = SolveReport(method="special_case", Q=res.Q.Q,
                                 theta=res.theta.theta, gamma=float(snrs.min()),
                                 capacity_bits=res.capacity_bits,
                                 per_user_snr=snrs,
                                 per_user_rate=np.log2(1.0 + snrs),
                                 status="optimal",
                                 extras={"k0": res.k0,
                                         "margins": res.condition22_margins})
        elif method == "special_case":
            print("special case condition not satisfied on this instance",
                  file=sys.stderr)
            return 1
    if report is None and method in ("alternating", "auto"):
        report = alternating.solve(ch, p_max, seed=args.seed)
    if report is None and method == "barrier":
        report = barrier.solve(ch, p_max, seed=args.seed)

    text = json.dumps(report.to_jsonable(), indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_sweep(args) -> int:
    plan = harness.load_plan(args.config)
    if args.seed is not None:
        plan = harness.load_plan({**_plan_doc(plan), "base_seed": args.seed})
    if args.workers is not None:
        plan = harness.load_plan({**_plan_doc(plan), "workers": args.workers})
    if args.method is not None:
        plan = harness.load_plan({**_plan_doc(plan),
                                  "methods": args.method.split(",")})
    rows, summary = harness.run(plan, out_path=args.out)
    print(harness.summary_table(summary))
    print(f"dataset hash (excl. timing): {harness.dataset_hash(rows)}")
    if args.out:
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _plan_doc(plan: harness.ExperimentPlan) -> dict:
    return {"schema_version": plan.schema_version, "axis": plan.axis,
            "axis_values": list(plan.axis_values), "fixed": plan.fixed,
            "methods": list(plan.methods), "trials": plan.trials,
            "base_seed": plan.base_seed, "workers": plan.workers,
            "solver": plan.solver}


def _cmd_bounds(args) -> int:
    values = [float(v) for v in args.values.split(",")]
    curve = bounds.bound_curves(args.kind, args.axis, values, M=args.m,
                                N=args.n, K=args.k, B=args.b,
                                p_max=args.p_max, l=args.l)
    lines = ["axis,axis_value,kind,value_bits"]
    lines += [f"{args.axis},{v:.10g},{args.kind},{x:.12g}"
              for v, x in zip(curve.axis_values, curve.values)]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")
    for w in curve.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def _cmd_verify(args) -> int:
    from . import acceptance
    wanted = None
    if args.criteria:
        wanted = {int(c) for c in args.criteria.split(",")}
    results = acceptance.run_all(fast=args.fast, criteria=wanted)
    return 0 if all(r.passed for r in results) else 2


def _cmd_bench(args) -> int:
    plan = harness.load_plan(args.config)
    rows, cdf = harness.timing_report(plan)
    lines = [harness.CSV_HEADER]
    lines += [",".join(r.csv_fields()) for r in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    for method, times in sorted(cdf.items()):
        arr = np.asarray(times)
        print(f"{method:<14} n={len(arr):<4d} median={np.median(arr):9.2f} ms  "
              f"p90={np.percentile(arr, 90):9.2f} ms")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"solve": _cmd_solve, "sweep": _cmd_sweep, "bounds": _cmd_bounds,
                "verify": _cmd_verify, "bench": _cmd_bench}
    try:
        return handlers[args.command](args)
    except (harness.ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
