"""Command-line entry point: ``parm solve|verify|porm-eq|sweep``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import serialize
from .audit import driver_best_response, verify_steady_state
from .economy import economy_to_dict, load_economy
from .errors import ParmError
from .experiments import load_sweep, rows_to_csv, run_sweep
from .mechanisms import parm_compensation, solve_first_best, solve_parm, solve_porm
from .metrics import revenue, welfare
from .porm_equilibrium import porm_equilibrium


def _header(args) -> list[str]:
    lines = [f"# config: {args.config}"] if getattr(args, "config", None) else []
    lines.append(f"seed: {args.seed if args.seed is not None else 'null'}")
    return lines


def _economy_lines(e) -> list[str]:
    d = economy_to_dict(e)
    return ["economy:"] + [f"  {k}: {v}" for k, v in d.items()]


def cmd_solve(args) -> int:
    e = load_economy(args.config)
    trace = open(args.trace, "w") if args.trace else None
    try:
        sections = [_header(args), _economy_lines(e)]
        if args.mechanism == "fb":
            plan = solve_first_best(e, trace=trace)
            comp = parm_compensation(e)
            sections += [serialize.plan_lines(plan), serialize.compensation_lines(comp)]
        elif args.mechanism == "parm":
            plan, comp, pen = solve_parm(e, trace=trace)
            sections += [serialize.plan_lines(plan), serialize.compensation_lines(comp),
                         serialize.penalty_lines(pen)]
        else:
            plan, comp = solve_porm(e, trace=trace)
            sections += [serialize.plan_lines(plan), serialize.compensation_lines(comp)]
    finally:
        if trace is not None:
            trace.close()
    sections.append([f"revenue: {revenue(plan, comp):.6f}", f"welfare: {welfare(e, plan):.6f}"])
    sys.stdout.write(serialize.dump(*sections))
    return 0


def cmd_verify(args) -> int:
    e = load_economy(args.config)
    parm = solve_parm(e)
    plan, comp, pen = parm
    rep = verify_steady_state(e, plan, comp)
    worst_dev = -float("inf")
    devs = []
    for b in range(e.n):
        for k in range(e.n):
            dv = driver_best_response(e, parm, k, b)
            devs.append(dv)
            worst_dev = max(worst_dev, dv.expected_value - e.w)
    dev_ok = worst_dev <= 1e-6
    out = [_header(args), serialize.audit_lines(rep), ["deviations:"]]
    for dv in devs:
        out.append(["  " + line for line in serialize.deviation_lines(dv)])
    sys.stdout.write(serialize.dump(*out))
    for name, v in rep.residuals.items():
        print(f"worst {name}: {v:.3e} ({'ok' if v <= rep.tol else 'FAIL'})", file=sys.stderr)
    print(f"worst deviation gain: {worst_dev:.3e} ({'ok' if dev_ok else 'FAIL'})", file=sys.stderr)
    return 0 if rep.passed and dev_ok else 1


def cmd_porm_eq(args) -> int:
    e = load_economy(args.config)
    eq = porm_equilibrium(e)
    sys.stdout.write(serialize.dump(_header(args), serialize.equilibrium_lines(eq)))
    return 0


def cmd_sweep(args) -> int:
    spec = load_sweep(args.spec)
    rows = run_sweep(spec, workers=args.workers)
    text = rows_to_csv(rows)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parm", description="Ridesharing pricing, dispatch and incentive audits.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="recorded in the output; every computation is deterministic")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve one mechanism and print the plan")
    p.add_argument("--config", required=True)
    p.add_argument("--mechanism", choices=("fb", "parm", "porm"), default="parm")
    p.add_argument("--trace", help="write 'iteration objective gap' lines to this file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", parents=[common], help="audit the PARM outcome; nonzero exit on failure")
    p.add_argument("--config", required=True)
    p.add_argument("--mechanism", choices=("parm",), default="parm")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("porm-eq", parents=[common], help="strategic equilibrium under type-blind prices")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_porm_eq)

    p = sub.add_parser("sweep", parents=[common], help="run a parameter sweep and write CSV")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
