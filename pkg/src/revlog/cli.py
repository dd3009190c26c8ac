"""Command line: ``revlog solve | sweep | eval | check``.

Exit status: 0 success, 1 usage error or failed check, 2 invalid instance
or parameters, 3 oracle budget refused.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .design import RiskParams
from .flows import check_capacity
from .instance import InstanceError, load_instance, reference_instance
from .oracle import BudgetExceeded, cvar_grid_min, grid_solve, micro_instances
from .reports import dump_json, mrvss_to_dict, run_sweep, solution_to_dict, write_sweep
from .risk import LossDistribution, cvar
from .solver import solve
from .stochastic import compute_mrvss

EXIT_USAGE, EXIT_INVALID, EXIT_BUDGET = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _Invalid(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}")


def _load(args):
    try:
        if args.instance == "reference":
            return reference_instance(scenario_mode=args.scenario_mode, seed=args.seed)
        return load_instance(args.instance, scenario_mode=args.scenario_mode, seed=args.seed)
    except (InstanceError, ValueError, OSError) as exc:
        raise _Invalid(f"invalid instance {args.instance}: {exc}")


def _risk(alpha, lam) -> RiskParams:
    try:
        return RiskParams(alpha, lam)
    except ValueError as exc:
        raise _Invalid(str(exc))


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    risk = _risk(args.alpha, args.lam)
    inst = _load(args)
    sol = solve(inst, risk)
    _emit(dump_json(solution_to_dict(inst, sol)), args.out)
    return 0


def cmd_eval(args) -> int:
    risk = _risk(args.alpha, args.lam)
    inst = _load(args)
    report = compute_mrvss(inst, risk)
    _emit(dump_json(mrvss_to_dict(inst, report)), args.out)
    return 0


def cmd_sweep(args) -> int:
    for a in args.alphas:
        _risk(a, 0.0)
    for l in args.lambdas:
        _risk(0.0, l)
    inst = _load(args)
    cells = run_sweep(inst, args.alphas, args.lambdas, with_mrvss=not args.no_mrvss)
    for p in write_sweep(inst, cells, args.out_dir):
        print(p)
    return 0


def cmd_check(args) -> int:
    if not args.grid_step > 0 or not args.eta_step > 0:
        raise _Invalid("steps must be positive")
    instances = list(micro_instances(args.micro))
    if args.instance:
        instances.append(_load(args))
    ok = True

    t0 = time.time()
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.distributions):
        n = int(rng.integers(2, 21))
        dist = LossDistribution(rng.uniform(0, 100, n), rng.dirichlet(np.ones(n)))
        alpha = float(rng.choice([0.0, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99]))
        dev = abs(cvar(dist, alpha)[1] - cvar_grid_min(dist, alpha, args.eta_step))
        worst = max(worst, dev * (1.0 - alpha) / args.eta_step)
    passed = worst <= 1.0 + 1e-9
    ok &= passed
    print(f"cvar vs grid minimum: {args.distributions} distributions, worst deviation "
          f"{worst:.3g} x step/(1-alpha) [{'ok' if passed else 'FAIL'}] ({time.time() - t0:.1f}s)")

    risks = [RiskParams(0.5, 0.0), RiskParams(0.9, 0.3), RiskParams(0.5, 1.0), RiskParams(0.9, 0.0)]
    for n, inst in enumerate(instances):
        risk = risks[n % len(risks)]
        try:
            grid = grid_solve(inst, risk, price_step=args.grid_step, budget=args.budget)
        except BudgetExceeded as exc:
            print(f"instance {n}: {exc}", file=sys.stderr)
            return EXIT_BUDGET
        sol = solve(inst, risk)
        diff = sol.objective - grid.objective
        flows_ok = check_capacity(sol.flows, inst.capacity)
        within = -0.01 <= diff <= grid.gap + 0.01 and flows_ok
        ok &= within
        print(f"instance {n}: solve {sol.objective:.6f} grid {grid.objective:.6f} "
              f"diff {diff:+.2e} gap {grid.gap:.3g} [{'ok' if within else 'FAIL'}]")
    print("all checks passed" if ok else "some checks failed")
    return 0 if ok else EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="revlog", description="Risk-averse reverse logistics network design.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def instance_flags(sp, required=True):
        sp.add_argument("--instance", required=required,
                        help="instance JSON file, or 'reference' for the bundled one")
        sp.add_argument("--scenario-mode", choices=["midpoint", "sample"], default="midpoint")
        sp.add_argument("--seed", type=int, default=42)

    sp = sub.add_parser("solve", help="optimal design and prices for one (alpha, lambda)")
    instance_flags(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("eval", help="MRRP, MREV and MRVSS for one (alpha, lambda)")
    instance_flags(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="solve a grid of (alpha, lambda) and write CSV tables")
    instance_flags(sp)
    sp.add_argument("--alphas", type=_floats, required=True)
    sp.add_argument("--lambdas", type=_floats, required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--no-mrvss", action="store_true", help="skip the expected-value solves")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("check", help="compare against the brute-force oracles")
    instance_flags(sp, required=False)
    sp.add_argument("--grid-step", type=float, default=0.001)
    sp.add_argument("--eta-step", type=float, default=0.01)
    sp.add_argument("--budget", type=int, default=10 ** 8)
    sp.add_argument("--micro", type=int, default=20, help="number of micro instances")
    sp.add_argument("--distributions", type=int, default=1000)
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Invalid as exc:
        print(f"revlog: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
