"""Routing remanufacturing flow from collection centers to recovery centers.

Each scenario is an independent transportation problem: supplies at the
collection centers, capacities at the recovery centers, linear shipping
costs on existing arcs. It is solved exactly by successive shortest paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

__all__ = [
    "FlowPlan",
    "Infeasible",
    "TOL",
    "check_capacity",
    "max_routable_fraction",
    "routable",
    "route_flows",
]

TOL = 1e-9


class Infeasible(Exception):
    """The collected quantity cannot be routed within recovery capacity."""


@dataclass(frozen=True, eq=False)
class FlowPlan:
    """Shipped quantities ``(I, J)`` for one scenario and their cost."""

    shipped: np.ndarray
    cost: float

    @property
    def active_arcs(self) -> np.ndarray:
        """y_ij read off as the support of the flow."""
        return self.shipped > 0


def _arcs(ship_cost, active_arcs):
    ship_cost = np.asarray(ship_cost, dtype=float)
    if active_arcs is None:
        return ~np.isnan(ship_cost)
    return np.asarray(active_arcs, dtype=bool) & ~np.isnan(ship_cost)


def _hall_ratios(collected, arcs, capacities):
    """Yield (demand, capacity) for every subset of centers with positive supply."""
    collected = np.asarray(collected, dtype=float)
    capacities = np.asarray(capacities, dtype=float)
    pos = [i for i in range(len(collected)) if collected[i] > 0]
    for r in range(1, len(pos) + 1):
        for subset in combinations(pos, r):
            reach = arcs[list(subset)].any(axis=0)
            yield sum(collected[i] for i in subset), float(capacities[reach].sum())


def routable(collected, ship_cost, capacities, active_arcs=None, tol: float = TOL) -> bool:
    """True iff the supplies can be shipped within capacity (Hall's condition)."""
    arcs = _arcs(ship_cost, active_arcs)
    return all(dem <= cap + tol for dem, cap in _hall_ratios(collected, arcs, capacities))


def max_routable_fraction(collected, ship_cost, capacities, active_arcs=None) -> float:
    """Largest ``s`` in [0, 1] such that ``s * collected`` is routable."""
    arcs = _arcs(ship_cost, active_arcs)
    s = 1.0
    for dem, cap in _hall_ratios(collected, arcs, capacities):
        s = min(s, cap / dem)
    return s


def _successive_shortest_paths(supply, cost, arcs, cap):
    I, J = cost.shape
    flow = np.zeros((I, J))
    left = supply.astype(float).copy()
    used = np.zeros(J)
    inf = float("inf")
    for _ in range(10 * (I + 1) * (J + 1) + 100):
        if left.max(initial=0.0) <= TOL:
            break
        # Bellman-Ford from every center that still has supply
        dc = [0.0 if left[i] > TOL else inf for i in range(I)]
        dr = [inf] * J
        pred_c = [-1] * I  # recovery center reached before center i (backward arc)
        pred_r = [-1] * J  # center before recovery center j
        for _ in range(I + J + 1):
            changed = False
            for i in range(I):
                if dc[i] == inf:
                    continue
                for j in range(J):
                    if arcs[i, j] and dc[i] + cost[i, j] < dr[j] - 1e-15:
                        dr[j] = dc[i] + cost[i, j]
                        pred_r[j] = i
                        changed = True
            for j in range(J):
                if dr[j] == inf:
                    continue
                for i in range(I):
                    if flow[i, j] > TOL and dr[j] - cost[i, j] < dc[i] - 1e-15:
                        dc[i] = dr[j] - cost[i, j]
                        pred_c[i] = j
                        changed = True
            if not changed:
                break
        sinks = [j for j in range(J) if dr[j] < inf and used[j] < cap[j] - TOL]
        if not sinks:
            break
        j = min(sinks, key=lambda jj: (dr[jj], jj))
        # trace the path back to its source center
        path = []
        jj = j
        while True:
            i = pred_r[jj]
            path.append((i, jj, +1))
            if pred_c[i] == -1:
                break
            jprev = pred_c[i]
            path.append((i, jprev, -1))
            jj = jprev
        src = path[-1][0]
        amount = min(left[src], cap[j] - used[j])
        for i_, j_, sign in path:
            if sign < 0:
                amount = min(amount, flow[i_, j_])
        for i_, j_, sign in path:
            flow[i_, j_] += sign * amount
        left[src] -= amount
        used[j] += amount
    return flow, left


def _two_sink_transport(supply, cost, arcs, cap):
    """Exact routing to two recovery centers; same contract as SSP.

    Everything starts on its cheapest arc. At most one recovery center can
    then be over capacity, and its excess moves to the other one in order of
    increasing extra cost per unit, which is optimal for this knapsack.
    """
    I = len(supply)
    flow = np.zeros((I, 2))
    left = np.zeros(I)
    on = np.empty(I, dtype=int)
    for i in range(I):
        if arcs[i, 0] and arcs[i, 1]:
            on[i] = 0 if cost[i, 0] <= cost[i, 1] else 1
        else:
            on[i] = 0 if arcs[i, 0] else 1
        flow[i, on[i]] = supply[i]
    load = flow.sum(axis=0)
    for j in (0, 1):
        excess = load[j] - cap[j]
        if excess <= 0:
            continue
        o = 1 - j
        movable = [i for i in range(I) if on[i] == j and arcs[i, o] and supply[i] > 0]
        movable.sort(key=lambda i: (cost[i, o] - cost[i, j], i))
        room = cap[o] - load[o]
        for i in movable:
            amount = min(excess, flow[i, j], max(room, 0.0))
            if amount <= 0:
                break
            flow[i, j] -= amount
            flow[i, o] += amount
            excess -= amount
            room -= amount
        for i in reversed(range(I)):
            if excess <= 0:
                break
            amount = min(excess, flow[i, j])
            flow[i, j] -= amount
            left[i] += amount
            excess -= amount
    return flow, left


def _min_cost_flow(supply, cost, arcs, cap):
    if cost.shape[1] == 2:
        return _two_sink_transport(supply, cost, arcs, cap)
    return _successive_shortest_paths(supply, cost, arcs, cap)


def route_flows(collected, ship_cost, capacities, active_arcs=None) -> FlowPlan:
    """Minimum-cost shipment of ``collected[i]`` units from every center.

    Raises :class:`Infeasible` when the supplies exceed the reachable
    recovery capacity by more than ``TOL``.
    """
    collected = np.asarray(collected, dtype=float)
    ship_cost = np.asarray(ship_cost, dtype=float)
    capacities = np.asarray(capacities, dtype=float)
    arcs = _arcs(ship_cost, active_arcs)
    I, J = ship_cost.shape
    shipped = np.zeros((I, J))
    if not np.any(collected > 0):
        return FlowPlan(shipped, 0.0)
    cost = np.where(arcs, ship_cost, np.inf)
    for i in np.flatnonzero(collected > 0):
        if not arcs[i].any():
            raise Infeasible(f"center {i} has supply but no recovery arc")

    # every center on its cheapest arc is optimal when capacity allows it
    cheapest = np.argmin(cost, axis=1)
    load = np.zeros(J)
    for i in np.flatnonzero(collected > 0):
        load[cheapest[i]] += collected[i]
    if np.all(load <= capacities):
        for i in np.flatnonzero(collected > 0):
            shipped[i, cheapest[i]] = collected[i]
    else:
        if not routable(collected, ship_cost, capacities, arcs):
            raise Infeasible("collected quantity exceeds reachable recovery capacity")
        flow, left = _min_cost_flow(collected, np.where(arcs, ship_cost, 0.0),
                                    arcs, capacities)
        for i in np.flatnonzero(left > 0):
            if left[i] > TOL:
                raise Infeasible("collected quantity exceeds reachable recovery capacity")
            flow[i, cheapest[i]] += left[i]
        shipped = flow
    total = float(np.sum(shipped[arcs] * ship_cost[arcs]))
    return FlowPlan(shipped, total)


def check_capacity(plans, capacities, tol: float = TOL) -> bool:
    """True iff every recovery center's inflow is within capacity + ``tol``.

    ``plans`` is a :class:`FlowPlan`, an iterable of them, or an array of
    shipped quantities shaped ``(I, J)`` or ``(S, I, J)``.
    """
    capacities = np.asarray(capacities, dtype=float)
    if isinstance(plans, FlowPlan):
        arrays: Iterable = [plans.shipped]
    elif isinstance(plans, np.ndarray):
        arrays = [plans] if plans.ndim == 2 else list(plans)
    else:
        arrays = [p.shipped if isinstance(p, FlowPlan) else np.asarray(p) for p in plans]
    return all(np.all(a.sum(axis=0) <= capacities + tol) for a in arrays)
