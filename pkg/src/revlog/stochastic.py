"""Value of the stochastic solution under the mean-risk objective.

All quantities are in profit orientation: ``mrrp`` is the optimal mean-risk
objective of the scenario problem, ``mrev`` is what the expected-value
problem's design and prices earn when judged on the full scenario set, and
their difference ``mrvss`` is the gain from modelling the uncertainty.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional

import numpy as np

from .choice import demand_table
from .design import Design, PriceVector, RiskParams
from .flows import Infeasible, max_routable_fraction
from .instance import Instance
from .risk import Evaluation, evaluate
from .solver import Solution, SolverConfig, solve

__all__ = [
    "StochasticReport",
    "compute_mrvss",
    "expected_value_instance",
    "mrvss_grid",
    "restrict_to_capacity",
    "scale_to_capacity",
]


def expected_value_instance(instance: Instance) -> Instance:
    """Collapse the scenarios into one with the expected return quantities."""
    if instance.n_scenarios == 1:
        return instance
    probs = np.asarray(instance.probs, dtype=float)
    mean = probs @ np.asarray(instance.quantities, dtype=float)
    return instance.with_scenarios(np.array([1.0]), mean[None, :])


def scale_to_capacity(instance: Instance, design: Design, prices: PriceVector,
                      eps: float = 1e-6) -> tuple[PriceVector, bool]:
    """Lower the remanufacturing incentives until every scenario routes.

    Each served node's attraction share is multiplied by the same factor,
    the smallest routable fraction over all scenarios, so every flow shrinks
    by that factor and the plan becomes feasible with the design unchanged.
    Returns the prices and whether any change was needed. The result can
    still overflow when a price hits its floor ``d + eps``.
    """
    table = demand_table(instance, design, prices)
    collected = table.collected()
    s = min(max_routable_fraction(collected[t], instance.ship_cost, instance.capacity)
            for t in range(instance.n_scenarios))
    if s >= 1.0:
        return prices, False
    s *= 1.0 - 1e-12
    v_r = np.array(prices.v_r, dtype=float)
    for k in design.served:
        i = design.assignment[k]
        x = s * table.x_r[k, i]
        d = instance.travel_cost[k, i]
        v_r[k] = max(d + np.log(instance.utility[k]) + np.log(x) - np.log1p(-x), d + eps)
    return PriceVector(v_r, prices.v_s), True


def _drop_nodes(design: Design, prices: PriceVector, dropped) -> tuple[Design, PriceVector]:
    assignment = tuple(None if k in dropped else i for k, i in enumerate(design.assignment))
    v_r = np.array(prices.v_r, dtype=float)
    v_s = np.array(prices.v_s, dtype=float)
    v_r[list(dropped)] = np.nan
    v_s[list(dropped)] = np.nan
    return Design(design.open_centers, assignment, design.cutoff), PriceVector(v_r, v_s)


def restrict_to_capacity(instance: Instance, design: Design, prices: PriceVector,
                         risk: RiskParams, max_subsets: int = 4096
                         ) -> tuple[Design, PriceVector, Evaluation, bool]:
    """Best plan that keeps the centers and cut-off of ``design`` and fits capacity.

    Candidates drop any subset of the served nodes and pass the rest through
    :func:`scale_to_capacity`; dropping every node is always feasible. When
    the plan already fits it is returned unchanged. With more served nodes
    than ``max_subsets`` allows, only the full plan and the plan without any
    node are tried.
    """
    scaled, changed = scale_to_capacity(instance, design, prices)
    if not changed:
        return design, prices, evaluate(instance, design, prices, risk)[0], False
    served = design.served
    if 2 ** len(served) <= max_subsets:
        subsets = [c for r in range(len(served) + 1) for c in combinations(served, r)]
    else:
        subsets = [(), tuple(served)]
    best = None
    for dropped in subsets:
        d, p = _drop_nodes(design, prices, set(dropped))
        p, _ = scale_to_capacity(instance, d, p)
        try:
            ev = evaluate(instance, d, p, risk)[0]
        except Infeasible:
            continue
        if best is None or ev.objective > best[2].objective:
            best = (d, p, ev)
    return best + (True,)


@dataclass(frozen=True, eq=False)
class StochasticReport:
    alpha: float
    lam: float
    mrrp: float
    mrev: float
    mrvss: float
    solution: Solution
    ev_solution: Solution
    ev_evaluation: Evaluation
    repaired: bool = False
    rows: list = field(default_factory=list)

    def row(self) -> dict:
        return {"alpha": self.alpha, "lambda": self.lam, "mrrp": self.mrrp,
                "mrev": self.mrev, "mrvss": self.mrvss, "ev_repaired": self.repaired}


def compute_mrvss(instance: Instance, risk: RiskParams,
                  config: Optional[SolverConfig] = None,
                  solution: Optional[Solution] = None) -> StochasticReport:
    """Solve both problems and compare them on the full scenario set.

    ``solution`` may pass in an already computed optimum of ``instance``.
    If the expected-value plan overflows recovery capacity in some scenario,
    it is replaced by its best feasible restriction from
    :func:`restrict_to_capacity` and the report is marked repaired.
    """
    sol = solution if solution is not None else solve(instance, risk, config)
    if instance.n_scenarios == 1:
        ev_sol, ev_eval, repaired = sol, sol.evaluation, False
    else:
        ev_sol = solve(expected_value_instance(instance), risk, config)
        _, _, ev_eval, repaired = restrict_to_capacity(
            instance, ev_sol.design, ev_sol.prices, risk)
    mrrp = sol.objective
    mrev = ev_eval.objective
    return StochasticReport(
        alpha=risk.alpha, lam=risk.lam, mrrp=mrrp, mrev=mrev, mrvss=mrrp - mrev,
        solution=sol, ev_solution=ev_sol, ev_evaluation=ev_eval, repaired=repaired)


def mrvss_grid(instance: Instance, alphas: Iterable[float], lams: Iterable[float],
               config: Optional[SolverConfig] = None) -> list[StochasticReport]:
    """One report per ``(alpha, lam)``, ordered by alpha then lambda."""
    lams = sorted(lams)
    return [compute_mrvss(instance, RiskParams(a, l), config)
            for a in sorted(alphas) for l in lams]
