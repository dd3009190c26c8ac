"""Scenario losses, CVaR and the mean-risk objective.

The loss in a scenario is the operational cost that depends on the realized
returns: incentives paid, shipping to recovery centers and remanufacturing.
Revenue and fixed opening cost stay outside the CVaR term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .choice import DemandTable, demand_table
from .design import Design, PriceVector, RiskParams
from .flows import FlowPlan, Infeasible, route_flows
from .instance import Instance

__all__ = [
    "Evaluation",
    "LossDistribution",
    "cvar",
    "cvar_arrays",
    "evaluate",
    "mean_risk_objective",
    "scenario_loss",
]


@dataclass(frozen=True, eq=False)
class LossDistribution:
    losses: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=float).ravel()
        probs = np.asarray(self.probs, dtype=float).ravel()
        if losses.shape != probs.shape or losses.size == 0:
            raise ValueError("losses and probabilities must be non-empty and aligned")
        if np.any(~(probs > 0)):
            raise ValueError("probabilities must be positive")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {probs.sum():g}")
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "probs", probs)

    def mean(self) -> float:
        return float(self.probs @ self.losses)


def cvar_arrays(losses: np.ndarray, probs: np.ndarray, alpha: float) -> tuple[float, float]:
    """Unchecked core of :func:`cvar` for hot loops."""
    order = np.argsort(losses, kind="stable")
    cum = np.cumsum(probs[order])
    # smallest loss whose cumulative probability reaches alpha
    idx = int(np.searchsorted(cum, alpha - 1e-12, side="left"))
    eta = float(losses[order[min(idx, len(order) - 1)]])
    excess = np.maximum(losses - eta, 0.0)
    return eta, eta + float(probs @ excess) / (1.0 - alpha)


def cvar(dist: LossDistribution, alpha: float) -> tuple[float, float]:
    """Return ``(eta, cvar)``: the alpha-quantile of the losses and the CVaR.

    The CVaR is ``eta + E[max(L - eta, 0)] / (1 - alpha)`` evaluated at the
    quantile, which minimizes that expression over ``eta``.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    return cvar_arrays(dist.losses, dist.probs, alpha)


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Every term of the mean-risk objective for one design and price vector.

    Revenue and cost terms are probability-weighted expectations.
    """

    losses: np.ndarray
    probs: np.ndarray
    var_threshold: float
    excess: np.ndarray
    cvar: float
    revenue_reman: float
    revenue_scrap: float
    fixed_cost: float
    incentive_reman: float
    incentive_scrap: float
    transport: float
    remanufacturing: float
    expected_loss: float
    expected_profit: float
    objective: float
    alpha: float
    lam: float

    def terms(self) -> dict:
        """The objective's parts, signed as they enter the objective."""
        return {
            "revenue_reman": self.revenue_reman,
            "revenue_scrap": self.revenue_scrap,
            "fixed_cost": -(1.0 + self.lam) * self.fixed_cost,
            "incentive_reman": -self.incentive_reman,
            "incentive_scrap": -self.incentive_scrap,
            "transport": -self.transport,
            "remanufacturing": -self.remanufacturing,
            "risk": -self.lam * self.cvar,
        }


def scenario_loss(instance: Instance, design: Design, prices: PriceVector,
                  table: DemandTable, plan: FlowPlan, scenario: int) -> float:
    """Operational cost of one scenario; no probability weight applied."""
    h = instance.quality[design.cutoff].h
    reman = table.reman[scenario]
    scrap = table.scrap[scenario]
    v_r = np.nan_to_num(prices.v_r)
    v_s = np.nan_to_num(prices.v_s)
    incentives = float(v_r @ reman.sum(axis=1) + v_s @ scrap.sum(axis=1))
    remanufacture = float(plan.shipped.sum()) * h * instance.reman_fixed_cost
    return incentives + plan.cost + remanufacture


def _check_prices(instance: Instance, design: Design, prices: PriceVector) -> None:
    beta = instance.quality[design.cutoff].beta
    for k, i in enumerate(design.assignment):
        if i is None:
            continue
        d = instance.travel_cost[k, i]
        for used, v, name in ((beta > 0, prices.v_r[k], "v_r"), (beta < 1, prices.v_s[k], "v_s")):
            if used and not v > d:
                raise Infeasible(
                    f"{name} for node {instance.nodes[k]} must exceed the travel cost {d}")


def evaluate(instance: Instance, design: Design, prices: PriceVector,
             risk: RiskParams) -> tuple[Evaluation, DemandTable, list[FlowPlan]]:
    """Full evaluation returning the demand table and per-scenario flow plans.

    Raises :class:`Infeasible` when a price is not above its travel cost or
    a scenario's remanufacturing supply exceeds recovery capacity.
    """
    design.check(instance)
    _check_prices(instance, design, prices)
    table = demand_table(instance, design, prices)
    collected = table.collected()
    plans = [route_flows(collected[t], instance.ship_cost, instance.capacity)
             for t in range(instance.n_scenarios)]
    remanufactured = table.reman.sum(axis=(1, 2))
    losses = np.array([scenario_loss(instance, design, prices, table, plans[t], t)
                       for t in range(instance.n_scenarios)])
    probs = np.asarray(instance.probs)
    eta, cv = cvar_arrays(losses, probs, risk.alpha)

    shipped = np.array([p.shipped.sum() for p in plans])
    h = instance.quality[design.cutoff].h
    v_r = np.nan_to_num(prices.v_r)
    v_s = np.nan_to_num(prices.v_s)
    revenue_reman = float(probs @ remanufactured) * instance.reman_value
    revenue_scrap = float(probs @ table.scrap.sum(axis=(1, 2))) * instance.scrap_value
    fixed = float(instance.fixed_cost @ np.asarray(design.open_centers, dtype=float))
    incentive_reman = float(probs @ (table.reman.sum(axis=2) @ v_r))
    incentive_scrap = float(probs @ (table.scrap.sum(axis=2) @ v_s))
    transport = float(probs @ np.array([p.cost for p in plans]))
    remanufacturing = float(probs @ shipped) * h * instance.reman_fixed_cost
    expected_loss = float(probs @ losses)
    revenue = revenue_reman + revenue_scrap
    objective = revenue - (1.0 + risk.lam) * fixed - expected_loss - risk.lam * cv
    ev = Evaluation(
        losses=losses,
        probs=probs,
        var_threshold=eta,
        excess=np.maximum(losses - eta, 0.0),
        cvar=cv,
        revenue_reman=revenue_reman,
        revenue_scrap=revenue_scrap,
        fixed_cost=fixed,
        incentive_reman=incentive_reman,
        incentive_scrap=incentive_scrap,
        transport=transport,
        remanufacturing=remanufacturing,
        expected_loss=expected_loss,
        expected_profit=revenue - fixed - expected_loss,
        objective=objective,
        alpha=risk.alpha,
        lam=risk.lam,
    )
    return ev, table, plans


def mean_risk_objective(instance: Instance, design: Design, prices: PriceVector,
                        risk: RiskParams) -> Evaluation:
    """Expected profit minus ``lam`` times (fixed cost + CVaR of the scenario loss)."""
    return evaluate(instance, design, prices, risk)[0]
