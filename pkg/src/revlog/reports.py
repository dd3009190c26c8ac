"""Solution documents, (alpha, lambda) sweeps and their CSV tables.

CSV schema (all files sorted by alpha, then lambda; floats written with
``repr`` so they read back exactly):

``sweep.csv``
    alpha, lambda, open_centers (center ids joined by ``;``), cutoff
    (1-based level, empty when nothing opens), beta, one ``v_r:<node>`` and ``v_s:<node>`` column per
    node in instance order (empty when unused), objective, cvar, eta,
    expected_profit.
``objective_by_lambda.csv``
    alpha, lambda, objective -- one line per point, ready to plot one
    curve per alpha.
``mrvss.csv``
    alpha, lambda, mrrp, mrev, mrvss, ev_repaired. Profit orientation:
    mrvss = mrrp - mrev is the gain from solving with all scenarios.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .design import RiskParams
from .instance import Instance
from .solver import Solution, SolverConfig, solve
from .stochastic import StochasticReport, compute_mrvss

__all__ = [
    "SweepCell",
    "dump_json",
    "mrvss_to_dict",
    "read_csv",
    "run_sweep",
    "solution_to_dict",
    "sweep_tables",
    "thread_limit",
    "write_sweep",
]


def _num(x) -> Optional[float]:
    x = float(x)
    return None if math.isnan(x) else x


def solution_to_dict(instance: Instance, sol: Solution) -> dict:
    """JSON-ready description of a solution with every objective part itemized."""
    ev = sol.evaluation
    d = sol.design
    level = instance.quality[d.cutoff]
    assignment = {n: (instance.centers[i] if i is not None else None)
                  for n, i in zip(instance.nodes, d.assignment)}
    prices = {n: {"v_r": _num(sol.prices.v_r[k]), "v_s": _num(sol.prices.v_s[k])}
              for k, n in enumerate(instance.nodes)}
    flows = []
    for t, plan in enumerate(sol.flows):
        shipped = {}
        for i, c in enumerate(instance.centers):
            row = {r: float(plan.shipped[i, j])
                   for j, r in enumerate(instance.recovery_centers) if plan.shipped[i, j] > 0}
            if row:
                shipped[c] = row
        flows.append({"scenario": t, "prob": float(ev.probs[t]),
                      "shipped": shipped, "cost": float(plan.cost)})
    return {
        "alpha": ev.alpha,
        "lambda": ev.lam,
        "objective": ev.objective,
        "design": {
            "open_centers": [c for c, o in zip(instance.centers, d.open_centers) if o],
            "assignment": assignment,
            "cutoff": None if d.is_empty else {"level": d.cutoff + 1, "beta": level.beta,
                                               "h": level.h},
        },
        "prices": prices,
        "terms": ev.terms(),
        "risk": {
            "var_threshold": ev.var_threshold,
            "cvar": ev.cvar,
            "losses": [float(x) for x in ev.losses],
            "excess": [float(x) for x in ev.excess],
        },
        "expected_profit": ev.expected_profit,
        "expected_loss": ev.expected_loss,
        "flows": flows,
    }


def mrvss_to_dict(instance: Instance, report: StochasticReport) -> dict:
    return {
        "orientation": "profit; mrvss = mrrp - mrev",
        **report.row(),
        "solution": solution_to_dict(instance, report.solution),
        "ev_solution": solution_to_dict(instance, report.ev_solution),
        "ev_evaluation": {"objective": report.ev_evaluation.objective,
                          "terms": report.ev_evaluation.terms(),
                          "cvar": report.ev_evaluation.cvar},
    }


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True, eq=False)
class SweepCell:
    alpha: float
    lam: float
    solution: Solution
    report: Optional[StochasticReport]


def thread_limit(default: int = 1) -> int:
    """Worker count from ``REVLOG_THREADS`` (at least 1)."""
    raw = os.environ.get("REVLOG_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def _cell(args):
    instance, alpha, lam, config, with_mrvss = args
    risk = RiskParams(alpha, lam)
    sol = solve(instance, risk, config)
    report = compute_mrvss(instance, risk, config, solution=sol) if with_mrvss else None
    return SweepCell(alpha, lam, sol, report)


def run_sweep(instance: Instance, alphas: Sequence[float], lams: Sequence[float],
              config: Optional[SolverConfig] = None, with_mrvss: bool = True,
              workers: Optional[int] = None) -> list[SweepCell]:
    """Solve every (alpha, lambda) pair; cells come back sorted by alpha, lambda."""
    for a in alphas:
        RiskParams(a, 0.0)
    for l in lams:
        RiskParams(0.0, l)
    jobs = [(instance, float(a), float(l), config, with_mrvss)
            for a in sorted(set(alphas)) for l in sorted(set(lams))]
    workers = thread_limit() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(_cell, jobs))
    return [_cell(j) for j in jobs]


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def sweep_tables(instance: Instance, cells: Sequence[SweepCell]) -> dict[str, str]:
    """CSV text of every sweep table keyed by file name."""
    cells = sorted(cells, key=lambda c: (c.alpha, c.lam))
    node_cols = []
    for n in instance.nodes:
        node_cols += [f"v_r:{n}", f"v_s:{n}"]
    header = (["alpha", "lambda", "open_centers", "cutoff", "beta"] + node_cols
              + ["objective", "cvar", "eta", "expected_profit"])
    rows, curve, metrics = [], [], []
    for c in cells:
        sol, ev = c.solution, c.solution.evaluation
        opened = ";".join(ci for ci, o in zip(instance.centers, sol.design.open_centers) if o)
        prices = []
        for k in range(len(instance.nodes)):
            prices += [_num(sol.prices.v_r[k]), _num(sol.prices.v_s[k])]
        if sol.design.is_empty:
            level = [None, None]
        else:
            level = [sol.design.cutoff + 1, float(instance.quality[sol.design.cutoff].beta)]
        rows.append([c.alpha, c.lam, opened] + level + prices
                    + [ev.objective, ev.cvar, ev.var_threshold, ev.expected_profit])
        curve.append([c.alpha, c.lam, ev.objective])
        if c.report is not None:
            r = c.report
            metrics.append([c.alpha, c.lam, r.mrrp, r.mrev, r.mrvss, int(r.repaired)])
    out = {
        "sweep.csv": _csv_text(header, rows),
        "objective_by_lambda.csv": _csv_text(["alpha", "lambda", "objective"], curve),
    }
    if metrics:
        out["mrvss.csv"] = _csv_text(
            ["alpha", "lambda", "mrrp", "mrev", "mrvss", "ev_repaired"], metrics)
    return out


def write_sweep(instance: Instance, cells: Sequence[SweepCell], out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in sweep_tables(instance, cells).items():
        p = out_dir / name
        p.write_text(text)
        paths.append(p)
    return paths


def read_csv(path) -> list[dict]:
    """Rows of a sweep table with numeric fields converted back to floats."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        conv = {}
        for k, v in row.items():
            if k == "open_centers":
                conv[k] = v.split(";") if v else []
            elif v == "":
                conv[k] = None
            else:
                conv[k] = float(v)
        out.append(conv)
    return out
