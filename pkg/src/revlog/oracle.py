"""Brute-force reference implementations used to check the main solver.

Nothing here imports the solver, the flow router or the CVaR routine: the
design space, the objective, the routing problem and the risk measure are
all re-derived from their definitions and evaluated exhaustively.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .design import Design, PriceVector, RiskParams
from .instance import Instance, QualityLevel
from .risk import LossDistribution

__all__ = [
    "BudgetExceeded",
    "GridSolution",
    "cvar_grid_min",
    "grid_solve",
    "micro_instances",
    "route_bruteforce_integer",
    "route_vertex_enum",
]

EPS = 1e-6


class BudgetExceeded(RuntimeError):
    """The exhaustive search would need more evaluations than allowed."""


def cvar_grid_min(dist: LossDistribution, alpha: float, eta_step: float) -> float:
    """Minimize ``eta + E[(L - eta)+] / (1 - alpha)`` over an ``eta`` grid."""
    if not eta_step > 0:
        raise ValueError("eta_step must be positive")
    L, p = dist.losses, dist.probs
    lo, hi = float(L.min()), float(L.max())
    n = int(np.floor((hi - lo) / eta_step)) + 1
    best = np.inf
    for start in range(0, n, 200_000):
        eta = lo + eta_step * np.arange(start, min(n, start + 200_000))
        vals = eta + (np.maximum(L[None, :] - eta[:, None], 0.0) @ p) / (1.0 - alpha)
        best = min(best, float(vals.min()))
    # the top of the range is always a candidate
    return min(best, hi + float(p @ np.maximum(L - hi, 0.0)) / (1.0 - alpha))


# --------------------------------------------------------------------------
# transportation problem


class _VertexTable:
    """Exact minimum routing cost through the vertices of the dual polytope.

    The transportation problem ``min a.f`` with supplies as equalities and
    capacities as upper limits has the dual ``max s.u + cap.w`` subject to
    ``u_i + w_j <= a_ij`` on every arc and ``w <= 0``. Whenever the supplies
    can be routed at all, its optimum is attained at one of the finitely
    many dual vertices, which are enumerated once; routability is checked
    separately over every subset of centers.
    """

    def __init__(self, ship_cost, capacities):
        ship_cost = np.asarray(ship_cost, dtype=float)
        self.cap = np.asarray(capacities, dtype=float)
        I, J = ship_cost.shape
        has_arc = ~np.isnan(ship_cost)
        self.dead = [i for i in range(I) if not has_arc[i].any()]
        self.live = [i for i in range(I) if has_arc[i].any()]
        nu = len(self.live)
        rows, rhs = [], []
        for a, i in enumerate(self.live):
            for j in range(J):
                if has_arc[i, j]:
                    g = np.zeros(nu + J)
                    g[a], g[nu + j] = 1.0, 1.0
                    rows.append(g)
                    rhs.append(ship_cost[i, j])
        for j in range(J):
            g = np.zeros(nu + J)
            g[nu + j] = 1.0
            rows.append(g)
            rhs.append(0.0)
        G, h = np.array(rows), np.array(rhs)
        vertices = []
        for tight in combinations(range(len(rows)), nu + J):
            M = G[list(tight)]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            z = np.linalg.solve(M, h[list(tight)])
            if np.all(G @ z <= h + 1e-9):
                vertices.append(z)
        V = np.array(vertices).reshape(len(vertices), nu + J)
        self.u, self.w = V[:, :nu], V[:, nu:]
        # routability: every group of centers fits into what it can reach
        self.groups = []
        for r in range(1, nu + 1):
            for sub in combinations(self.live, r):
                reach = has_arc[list(sub)].any(axis=0)
                self.groups.append((list(sub), float(self.cap[reach].sum())))

    def min_cost(self, supply: np.ndarray) -> np.ndarray:
        """Minimum routing cost for each row of ``supply`` (N, I); inf if infeasible."""
        supply = np.atleast_2d(np.asarray(supply, dtype=float))
        ok = np.ones(supply.shape[0], dtype=bool)
        for i in self.dead:
            ok &= supply[:, i] <= 1e-12
        for sub, cap in self.groups:
            ok &= supply[:, sub].sum(axis=1) <= cap + 1e-9
        if not self.live:
            return np.where(ok, 0.0, np.inf)
        value = (supply[:, self.live] @ self.u.T + self.cap @ self.w.T).max(axis=1)
        return np.where(ok, value, np.inf)


def route_vertex_enum(collected, ship_cost, capacities) -> float:
    """Minimum routing cost by enumerating the vertices of the dual problem."""
    return float(_VertexTable(ship_cost, capacities).min_cost(np.asarray(collected, float))[0])


def _compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 0:
        return np.zeros((1 if total == 0 else 0, 0), dtype=int)
    rows = []
    for cuts in combinations(range(total + parts - 1), parts - 1):
        edges = (-1,) + cuts + (total + parts - 1,)
        rows.append([edges[t + 1] - edges[t] - 1 for t in range(parts)])
    return np.array(rows, dtype=int).reshape(len(rows), parts)


def route_bruteforce_integer(collected, ship_cost, capacities) -> float:
    """Minimum routing cost over every integer split of integer supplies.

    Partial assignments are merged when they load the recovery centers
    identically, keeping the cheapest, so the search stays exhaustive.
    """
    ship_cost = np.asarray(ship_cost, dtype=float)
    cap = np.asarray(capacities, dtype=float)
    I, J = ship_cost.shape
    loads = np.zeros((1, J), dtype=int)
    costs = np.zeros(1)
    for i in range(I):
        q = int(round(float(collected[i])))
        if q == 0:
            continue
        cols = [j for j in range(J) if not np.isnan(ship_cost[i, j])]
        if not cols:
            return np.inf
        part = _compositions(q, len(cols))
        comp = np.zeros((len(part), J), dtype=int)
        comp[:, cols] = part
        ccost = part @ ship_cost[i, cols]
        new_loads = (loads[:, None, :] + comp[None, :, :]).reshape(-1, J)
        new_costs = (costs[:, None] + ccost[None, :]).ravel()
        keep = np.all(new_loads <= cap + 1e-9, axis=1)
        new_loads, new_costs = new_loads[keep], new_costs[keep]
        if not len(new_costs):
            return np.inf
        order = np.lexsort((new_costs,) + tuple(new_loads.T))
        new_loads, new_costs = new_loads[order], new_costs[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = np.any(new_loads[1:] != new_loads[:-1], axis=1)
        loads, costs = new_loads[first], new_costs[first]
    return float(costs.min())


# --------------------------------------------------------------------------
# exhaustive design x price-grid search


@dataclass(frozen=True, eq=False)
class GridSolution:
    design: Design
    prices: PriceVector
    objective: float
    gap: float  # bound on how far the true optimum may lie above ``objective``
    evaluations: int


def _designs(instance: Instance):
    K, I = instance.travel_cost.shape
    yield Design((False,) * I, (None,) * K, 0)
    for mask in product((False, True), repeat=I):
        if not any(mask):
            continue
        options = [[None] + [i for i in range(I) if mask[i] and not np.isnan(instance.travel_cost[k, i])]
                   for k in range(K)]
        for q in range(len(instance.quality)):
            for assign in product(*options):
                yield Design(tuple(mask), tuple(assign), q)


def _axes(instance: Instance, design: Design, step: float):
    """Price grid for every free coordinate as ``(kind, node, values)``."""
    beta = instance.quality[design.cutoff].beta
    axes = []
    for k, i in enumerate(design.assignment):
        if i is None:
            continue
        d = instance.travel_cost[k, i]
        for kind, used, top in (("r", beta > 0, instance.reman_value),
                                ("s", beta < 1, instance.scrap_value)):
            if not used:
                continue
            lo = d + EPS
            if lo > top:
                return None
            n = int(np.floor((top - lo) / step))
            vals = lo + step * np.arange(n + 1)
            if top - vals[-1] > 1e-12:
                vals = np.append(vals, top)
            axes.append((kind, k, vals))
    return axes


def _grid_values(instance: Instance, design: Design, risk: RiskParams, axes, router,
                 chunk: int = 200_000) -> np.ndarray:
    """Objective on the full price grid of one design, shaped like the grid."""
    shape = tuple(len(v) for _, _, v in axes)
    total = int(np.prod(shape)) if shape else 1
    S = instance.n_scenarios
    I = len(instance.centers)
    q = instance.quality[design.cutoff]
    probs = np.asarray(instance.probs, dtype=float)
    fixed = float(np.dot(instance.fixed_cost, design.open_centers))
    out = np.empty(total)
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(total, start + chunk)), shape) if shape else ()
        N = len(idx[0]) if shape else 1
        supply = np.zeros((S, N, I))
        loss = np.zeros((S, N))
        revenue = np.zeros((S, N))
        for (kind, k, vals), ix in zip(axes, idx):
            v = vals[ix]
            i = design.assignment[k]
            e = np.exp(v - instance.travel_cost[k, i])
            x = e / (e + instance.utility[k])
            R = instance.quantities[:, k][:, None]
            if kind == "r":
                D = R * q.beta * x[None, :]
                supply[:, :, i] += D
                loss += D * (v[None, :] + q.h * instance.reman_fixed_cost)
                revenue += D * instance.reman_value
            else:
                D = R * (1.0 - q.beta) * x[None, :]
                loss += D * v[None, :]
                revenue += D * instance.scrap_value
        for t in range(S):
            loss[t] += router.min_cost(supply[t])
        # CVaR: the minimizing threshold sits on one of the scenario losses
        cv = np.full(N, np.inf)
        with np.errstate(invalid="ignore"):
            for t in range(S):
                eta = loss[t]
                excess = np.maximum(loss - eta[None, :], 0.0)
                cv = np.minimum(cv, eta + probs @ excess / (1.0 - risk.alpha))
            vals = probs @ (revenue - loss) - (1.0 + risk.lam) * fixed - risk.lam * cv
        out[start:start + N] = np.where(np.isfinite(vals), vals, -np.inf)
    return out.reshape(shape) if shape else out


def _lipschitz_gap(instance: Instance, design: Design, risk: RiskParams, axes, step: float) -> float:
    """How far the design's true optimum can lie above its best grid point.

    Each price moves the objective at most ``L_k`` per unit: the logit share
    has slope at most 1/4, revenue and the per-scenario loss are products of
    that share with bounded margins, rerouting one extra unit costs at most
    the sum of all arc costs, and CVaR moves no more than the largest change
    of a scenario loss. Rounding every price down to the grid keeps the
    capacity constraints satisfied and moves each coordinate by at most
    ``step``.
    """
    probs = np.asarray(instance.probs, dtype=float)
    q = instance.quality[design.cutoff]
    route = float(np.nansum(instance.ship_cost))
    gap = 0.0
    for kind, k, _ in axes:
        R = instance.quantities[:, k]
        if kind == "r":
            share = q.beta
            top = instance.reman_value
            unit = top + q.h * instance.reman_fixed_cost + route
        else:
            share = 1.0 - q.beta
            top = instance.scrap_value
            unit = top
        revenue_slope = share * top / 4.0
        loss_slope = share * (1.0 + unit / 4.0)
        L = float(probs @ R) * (revenue_slope + loss_slope) + risk.lam * float(R.max()) * loss_slope
        gap += L * step
    return gap


def grid_solve(instance: Instance, risk: RiskParams, price_step: float = 0.001,
               budget: int = 10 ** 8) -> GridSolution:
    """Best design and grid prices by exhaustive enumeration.

    Raises :class:`BudgetExceeded` before doing any work when the number of
    (design, grid point) evaluations would exceed ``budget``.
    """
    if not price_step > 0:
        raise ValueError("price_step must be positive")
    plan = []
    count = 0
    for design in _designs(instance):
        axes = _axes(instance, design, price_step)
        if axes is None:
            continue
        size = int(np.prod([len(v) for _, _, v in axes])) if axes else 1
        count += size
        plan.append((design, axes))
    if count > budget:
        raise BudgetExceeded(f"{count} grid evaluations exceed the budget of {budget}")

    router = _VertexTable(instance.ship_cost, instance.capacity)
    K = len(instance.nodes)
    best = None
    gap = 0.0
    for design, axes in plan:
        gap = max(gap, _lipschitz_gap(instance, design, risk, axes, price_step))
        grid = _grid_values(instance, design, risk, axes, router)
        flat = int(np.argmax(grid))
        val = float(grid.ravel()[flat])
        if best is not None and not val > best[0]:
            continue
        v_r, v_s = np.full(K, np.nan), np.full(K, np.nan)
        pos = np.unravel_index(flat, grid.shape) if axes else ()
        for (kind, k, vals), ix in zip(axes, pos):
            (v_r if kind == "r" else v_s)[k] = vals[ix]
        best = (val, design, PriceVector(v_r, v_s))
    return GridSolution(best[1], best[2], best[0], gap, count)


# --------------------------------------------------------------------------
# small random instances


def micro_instances(n: int = 20, seed: int = 7) -> list[Instance]:
    """Tiny instances whose price grids stay at most two-dimensional.

    Up to two nodes, centers, recovery centers, scenarios and quality
    levels. With two nodes the levels are pure scrap or pure remanufacture
    so each served node has one price; a single node may mix both.
    Capacities are drawn low enough to bind in part of the instances.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        K = int(rng.integers(1, 3))
        I = int(rng.integers(1, 3))
        J = int(rng.integers(1, 3))
        S = int(rng.integers(1, 3))
        Q = int(rng.integers(1, 3))
        d = np.round(rng.uniform(0.2, 0.6, (K, I)), 3)
        if I == 2 and rng.random() < 0.3:
            d[rng.integers(K), rng.integers(I)] = np.nan
        a = np.round(rng.uniform(0.05, 0.3, (I, J)), 3)
        if I * J > 1 and rng.random() < 0.3:
            a[rng.integers(I), rng.integers(J)] = np.nan
        if np.any(np.all(np.isnan(a), axis=1)):
            continue
        if K == 2:
            betas = sorted(rng.choice([0.0, 1.0], size=Q, replace=False))
        else:
            betas = sorted(np.round(rng.uniform(0, 1, Q), 2))
        hs = sorted(np.round(rng.uniform(0.0, 0.2, Q), 2))
        R = np.round(rng.uniform(10, 100, (S, K)), 1)
        probs = np.array([1.0]) if S == 1 else np.array([0.4, 0.6])
        cap = np.round(rng.uniform(0.05, 0.4, J) * R.sum(axis=1).max(), 1)
        dmax = float(np.nanmax(d))
        out.append(Instance(
            nodes=tuple(f"n{k + 1}" for k in range(K)),
            centers=tuple(f"c{i + 1}" for i in range(I)),
            recovery_centers=tuple(f"r{j + 1}" for j in range(J)),
            travel_cost=d,
            ship_cost=a,
            fixed_cost=np.round(rng.uniform(0, 6, I), 2),
            utility=np.round(rng.uniform(2.0, 8.0, K), 2),
            reman_value=round(dmax + float(rng.uniform(2.0, 2.5)), 3),
            scrap_value=round(dmax + float(rng.uniform(1.6, 2.0)), 3),
            reman_fixed_cost=1.0,
            quality=tuple(QualityLevel(float(b), float(h)) for b, h in zip(betas, hs)),
            capacity=cap,
            probs=probs,
            quantities=R,
        ))
    return out
