"""Exact design enumeration with numerical price optimization per design.

Every binary design (open centers, node assignments, quality cut-off) is
enumerated; for each one the incentive prices are optimized by multi-start
coordinate ascent with golden-section line searches. A separable upper
bound on each design's best objective lets :func:`solve` skip designs that
cannot beat the incumbent without changing the result.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Iterator, Optional

import numpy as np
from scipy.special import expit

from .choice import DemandTable
from .design import Design, PriceVector, RiskParams
from .flows import FlowPlan, Infeasible, _min_cost_flow
from .instance import Instance
from .risk import Evaluation, cvar_arrays, evaluate

__all__ = [
    "Solution",
    "SolverConfig",
    "count_designs",
    "design_upper_bound",
    "enumerate_designs",
    "optimize_prices",
    "solve",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
TIE_TOL = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    starts: int = 5
    tol: float = 1e-7  # objective change that ends the ascent
    xtol: float = 1e-7  # golden-section bracket width
    scan_points: int = 12
    max_sweeps: int = 60
    eps: float = 1e-6  # strict lower price bound: v >= d + eps
    prune: bool = True


@dataclass(frozen=True, eq=False)
class Solution:
    design: Design
    prices: PriceVector
    evaluation: Evaluation
    demand: DemandTable
    flows: list[FlowPlan]
    stats: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.evaluation.objective


# --------------------------------------------------------------------------
# design space


def _reachable(instance: Instance, k: int, open_centers) -> list[int]:
    arcs = instance.node_center_arcs
    return [i for i, o in enumerate(open_centers) if o and arcs[k, i]]


def enumerate_designs(instance: Instance) -> Iterator[Design]:
    """Yield every design satisfying the path and single-assignment rules.

    The empty design comes first and only once; other designs are ordered by
    center subset, then cut-off, then assignment.
    """
    I, Q = len(instance.centers), len(instance.quality)
    yield Design.empty(instance)
    for mask in product((False, True), repeat=I):
        if not any(mask):
            continue
        options = [[None] + _reachable(instance, k, mask) for k in range(len(instance.nodes))]
        for q in range(Q):
            for assignment in product(*options):
                yield Design(tuple(mask), tuple(assignment), q)


def count_designs(instance: Instance) -> int:
    I, Q = len(instance.centers), len(instance.quality)
    total = 1
    for mask in product((False, True), repeat=I):
        if any(mask):
            total += Q * math.prod(1 + len(_reachable(instance, k, mask))
                                   for k in range(len(instance.nodes)))
    return total


# --------------------------------------------------------------------------
# fast evaluation of one design


class _DesignProblem:
    """Vectorized objective for a fixed design as a function of its prices."""

    def __init__(self, instance: Instance, design: Design, risk: RiskParams, eps: float):
        self.instance = instance
        self.design = design
        self.risk = risk
        served = list(design.served)
        self.served = served
        n = len(served)
        centers = [design.assignment[k] for k in served]
        q = instance.quality[design.cutoff]
        self.beta, self.h = q.beta, q.h
        self.d = np.array([instance.travel_cost[k, i] for k, i in zip(served, centers)])
        self.logu = np.log(instance.utility[served])
        self.R = np.asarray(instance.quantities[:, served], dtype=float)  # (S, n)
        self.probs = np.asarray(instance.probs, dtype=float)
        self.I = len(instance.centers)
        self.A = np.zeros((n, self.I))
        self.A[np.arange(n), centers] = 1.0
        self.fixed = float(instance.fixed_cost @ np.asarray(design.open_centers, dtype=float))
        self.P, self.C = instance.reman_value, instance.scrap_value
        self.hc = self.h * instance.reman_fixed_cost
        self.ship = instance.ship_cost
        self.cap = np.asarray(instance.capacity, dtype=float)
        arcs = instance.center_recovery_arcs
        cost = np.where(arcs, instance.ship_cost, np.inf)
        self.cheap_cost = np.where(arcs.any(axis=1), cost.min(axis=1), np.inf)
        cheapest = np.argmin(cost, axis=1)
        self.cheap_onehot = np.zeros((self.I, len(self.cap)))
        self.cheap_onehot[np.arange(self.I), cheapest] = 1.0
        self.cheap_finite = np.where(np.isfinite(self.cheap_cost), self.cheap_cost, 0.0)
        self.arcs = arcs
        self.ship0 = np.where(arcs, instance.ship_cost, 0.0)
        # Hall inequalities over subsets of the used centers
        used = sorted(set(centers)) if self.beta > 0 else []
        rows, caps = [], []
        for r in range(1, len(used) + 1):
            for sub in combinations(used, r):
                row = np.zeros(self.I)
                row[list(sub)] = 1.0
                rows.append(row)
                caps.append(float(self.cap[arcs[list(sub)].any(axis=0)].sum()))
        self.hall = np.array(rows).reshape(len(rows), self.I)
        self.hall_cap = np.array(caps)

        self.r_coords = list(range(n)) if self.beta > 0 else []
        self.s_coords = list(range(n)) if self.beta < 1 else []
        self.lo = self.d + eps
        self.hi_r = np.full(n, self.P)
        self.hi_s = np.full(n, self.C)

    @property
    def empty(self) -> bool:
        return not self.served

    def bounds_ok(self) -> bool:
        if self.r_coords and np.any(self.lo > self.hi_r):
            return False
        if self.s_coords and np.any(self.lo > self.hi_s):
            return False
        return True

    def supply(self, vr) -> np.ndarray:
        if self.beta == 0:
            return np.zeros((len(self.probs), self.I))
        xr = expit(vr - self.d - self.logu)
        return (self.R * (self.beta * xr)) @ self.A

    def feasible(self, vr) -> bool:
        if self.beta == 0 or not self.hall_cap.size:
            return True
        s = self.supply(vr)
        return bool(np.all(s @ self.hall.T <= self.hall_cap))

    def max_feasible(self, vr, p: int) -> Optional[float]:
        """Largest ``v_r[p]`` in ``[lo, hi]`` keeping every scenario routable.

        Supply is linear in the attraction share of node ``p``, so the limit
        comes from the tightest Hall inequality. ``None`` if even ``lo`` fails.
        """
        lo, hi = self.lo[p], self.hi_r[p]
        if self.beta == 0 or not self.hall_cap.size:
            return hi
        others = vr.copy()
        xr = expit(others - self.d - self.logu)
        xr[p] = 0.0
        base = (self.R * (self.beta * xr)) @ self.A @ self.hall.T  # (S, H)
        slack = self.hall_cap - base
        coef = np.outer(self.R[:, p] * self.beta, self.hall[:, self.A[p].argmax()])
        with np.errstate(divide="ignore", invalid="ignore"):
            limits = np.where(coef > 0, slack / coef, np.inf)
        if np.any((coef == 0) & (slack < -1e-9)):
            return None
        x_max = float(limits.min()) * (1.0 - 1e-12)
        c = self.d[p] + self.logu[p]
        if x_max >= 1.0:
            return hi
        if x_max <= 0.0:
            return None
        v = c + math.log(x_max) - math.log1p(-x_max)
        if v < lo:
            return None
        return min(v, hi)

    def value(self, vr, vs) -> float:
        """Objective, or ``-inf`` when the remanufacturing flow cannot be routed."""
        probs = self.probs
        S = len(probs)
        if self.beta > 0:
            xr = expit(vr - self.d - self.logu)
            Dr = self.R * (self.beta * xr)
            supply = Dr @ self.A
            if self.hall_cap.size and np.any(supply @ self.hall.T > self.hall_cap):
                return -math.inf
            transport = supply @ self.cheap_finite
            over = np.any(supply @ self.cheap_onehot > self.cap, axis=1)
            for t in np.flatnonzero(over):
                flow, _ = _min_cost_flow(supply[t], self.ship0, self.arcs, self.cap)
                transport[t] = float(np.sum(flow * self.ship0))
            reman_units = Dr.sum(axis=1)
            loss = Dr @ vr + transport + self.hc * reman_units
            revenue = self.P * reman_units
        else:
            loss = np.zeros(S)
            revenue = np.zeros(S)
        if self.beta < 1:
            xs = expit(vs - self.d - self.logu)
            Ds = self.R * ((1.0 - self.beta) * xs)
            loss = loss + Ds @ vs
            revenue = revenue + self.C * Ds.sum(axis=1)
        lam = self.risk.lam
        cv = cvar_arrays(loss, probs, self.risk.alpha)[1] if lam else 0.0
        return float(probs @ (revenue - loss)) - (1.0 + lam) * self.fixed - lam * cv

    def prices(self, vr, vs) -> PriceVector:
        K = len(self.instance.nodes)
        pv = PriceVector.empty(K)
        v_r, v_s = pv.v_r.copy(), pv.v_s.copy()
        if self.r_coords:
            v_r[self.served] = vr
        if self.s_coords:
            v_s[self.served] = vs
        return PriceVector(v_r, v_s)


# --------------------------------------------------------------------------
# one-dimensional searches


def _golden_max(f, a: float, b: float, xtol: float):
    """Golden-section maximization of ``f`` on ``[a, b]``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _line_max(f, a: float, b: float, n_scan: int, xtol: float):
    """Coarse scan of ``[a, b]`` followed by golden section around the best point."""
    if b - a <= xtol:
        return a, f(a)
    xs = np.linspace(a, b, n_scan)
    fs = [f(x) for x in xs]
    j = int(np.argmax(fs))
    lo, hi = xs[max(j - 1, 0)], xs[min(j + 1, n_scan - 1)]
    x, fx = _golden_max(f, lo, hi, xtol)
    if fs[j] >= fx:
        return float(xs[j]), fs[j]
    return x, fx


def _bisect_feasible(ok, lo: float, hi: float, iters: int = 60) -> float:
    """Largest x in [lo, hi] with ``ok(x)``, given ``ok(lo)`` and monotonicity."""
    if ok(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * (1.0 + abs(hi)):
            break
    return lo


# --------------------------------------------------------------------------
# upper bound


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _logit_profit_max(A: float, B: float, c: float, lo: float, hi: float):
    """Maximize ``expit(v - c) * (A - B v)`` over ``[lo, hi]`` for ``B >= 0``.

    The function is unimodal. Its stationary point solves
    ``w + log(w) = A/B - c - 1`` with ``v = A/B - 1 - w``, found by Newton
    steps that approach the root monotonically from below.
    """
    def f(v):
        return _sigmoid(v - c) * (A - B * v)

    if B <= 0:
        v = hi if A > 0 else lo
        return f(v), v
    K = A / B - c - 1.0
    w = K - math.log(K) if K >= 1.0 else math.exp(K - 1.0)
    for _ in range(100):
        step = (w + math.log(w) - K) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 1e-15 * (1.0 + w):
            break
    v = min(max(c + K - w, lo), hi)
    return f(v), v


def _tail_weights(instance: Instance, alpha: float) -> np.ndarray:
    """A fixed element of the CVaR risk envelope.

    Scenarios are ranked by total returns and the tail mass is filled from
    the largest one, so ``sum(w * L) <= CVaR(L)`` for any loss vector.
    """
    probs = np.asarray(instance.probs, dtype=float)
    order = np.argsort(-instance.quantities.sum(axis=1), kind="stable")
    w = np.zeros_like(probs)
    left = 1.0
    for t in order:
        w[t] = min(probs[t] / (1.0 - alpha), left)
        left -= w[t]
        if left <= 0:
            break
    return w


class _BoundModel:
    """Separable upper bound on the best objective of every design.

    Capacity is relaxed through multipliers ``mu`` on the total capacity of
    the open centers' recovery centers, CVaR is bounded below by a fixed
    envelope element, and shipping by the cheapest arc.
    """

    def __init__(self, instance: Instance, risk: RiskParams, eps: float):
        self.instance = instance
        self.risk = risk
        self.eps = eps
        self.probs = np.asarray(instance.probs, dtype=float)
        w = _tail_weights(instance, risk.alpha)
        self.omega = self.probs + risk.lam * w
        arcs = instance.center_recovery_arcs
        cost = np.where(arcs, instance.ship_cost, np.inf)
        self.cheap = cost.min(axis=1)
        self._s_cache: dict = {}

    def scrap_part(self, k: int, i: int, q: int):
        key = (k, i, q)
        if key not in self._s_cache:
            inst = self.instance
            beta = inst.quality[q].beta
            if beta >= 1:
                self._s_cache[key] = (0.0, math.nan)
            else:
                d = inst.travel_cost[k, i]
                lo, hi = d + self.eps, inst.scrap_value
                if lo > hi:
                    self._s_cache[key] = (-math.inf, math.nan)
                else:
                    R = inst.quantities[:, k]
                    A = (1 - beta) * float(R @ (self.probs * inst.scrap_value))
                    B = (1 - beta) * float(R @ self.omega)
                    self._s_cache[key] = _logit_profit_max(A, B, d + math.log(inst.utility[k]), lo, hi)
        return self._s_cache[key]

    def reman_part(self, k: int, i: int, q: int, mu: np.ndarray):
        inst = self.instance
        beta = inst.quality[q].beta
        if beta <= 0:
            return 0.0, math.nan
        R = inst.quantities[:, k]
        if not np.isfinite(self.cheap[i]):
            return (-math.inf, math.nan) if np.any(R > 0) else (0.0, math.nan)
        d = inst.travel_cost[k, i]
        lo, hi = d + self.eps, inst.reman_value
        if lo > hi:
            return -math.inf, math.nan
        kappa = inst.quality[q].h * inst.reman_fixed_cost + self.cheap[i]
        A = beta * float(R @ (self.probs * inst.reman_value - self.omega * kappa - mu))
        B = beta * float(R @ self.omega)
        return _logit_profit_max(A, B, d + math.log(inst.utility[k]), lo, hi)

    def bound(self, design: Design, mu: Optional[np.ndarray] = None):
        """Return ``(bound, v_r, v_s)`` with the separable maximizers as prices."""
        inst = self.instance
        S = len(self.probs)
        mu = np.zeros(S) if mu is None else mu
        K = len(inst.nodes)
        v_r, v_s = np.full(K, np.nan), np.full(K, np.nan)
        fixed = float(inst.fixed_cost @ np.asarray(design.open_centers, dtype=float))
        total = -(1.0 + self.risk.lam) * fixed
        if np.any(mu):
            reach = inst.center_recovery_arcs[list(np.flatnonzero(design.open_centers))].any(axis=0)
            total += float(mu.sum() * inst.capacity[reach].sum())
        for k in design.served:
            i = design.assignment[k]
            fr, vr = self.reman_part(k, i, design.cutoff, mu)
            fs, vs = self.scrap_part(k, i, design.cutoff)
            total += fr + fs
            v_r[k], v_s[k] = vr, vs
        return total, v_r, v_s

    def overloaded(self, design: Design, v_r: np.ndarray) -> np.ndarray:
        """Scenarios whose total capacity the relaxed maximizer exceeds."""
        inst = self.instance
        beta = inst.quality[design.cutoff].beta
        served = list(design.served)
        if beta <= 0 or not served:
            return np.zeros(len(self.probs), dtype=bool)
        reach = inst.center_recovery_arcs[list(np.flatnonzero(design.open_centers))].any(axis=0)
        c = np.array([inst.travel_cost[k, design.assignment[k]] for k in served])
        x = 1.0 / (1.0 + inst.utility[served] * np.exp(c - v_r[served]))
        supply = inst.quantities[:, served] @ (beta * x)
        return supply > inst.capacity[reach].sum() + 1e-9

    def tightened(self, design: Design, rounds: int = 3):
        """Minimize the bound over the capacity multipliers.

        The bound is convex but not smooth in ``mu`` and plain coordinate
        descent from zero can stall, so it starts from the best
        single-scenario multiplier.
        """
        S = len(self.probs)
        best, vr, vs = self.bound(design)
        active = list(np.flatnonzero(self.overloaded(design, vr)))
        if not active:
            return best, vr, vs
        mu = np.zeros(S)

        def search(t, base):
            top = 2.0 * self.probs[t] * self.instance.reman_value + 1.0

            def phi(m):
                trial = base.copy()
                trial[t] = m
                return -self.bound(design, trial)[0]

            return _golden_max(phi, 0.0, top, 1e-7 * top)

        for t in active:
            m, val = search(t, np.zeros(S))
            if -val < best:
                mu = np.zeros(S)
                mu[t] = m
                best, vr, vs = self.bound(design, mu)
        for _ in range(rounds if len(active) > 1 else 0):
            start = best
            for t in active:
                m, val = search(t, mu)
                if -val < best:
                    mu[t] = m
                    best, vr, vs = self.bound(design, mu)
            if start - best <= 1e-9 * (1.0 + abs(best)):
                break
        return best, vr, vs


def design_upper_bound(instance: Instance, design: Design, risk: RiskParams,
                       eps: float = 1e-6, tighten: bool = True) -> float:
    """An upper bound on the objective any prices can achieve for ``design``."""
    model = _BoundModel(instance, risk, eps)
    return (model.tightened(design) if tighten else model.bound(design))[0]


# --------------------------------------------------------------------------
# price optimization


def _ascent(prob: _DesignProblem, vr, vs, cfg: SolverConfig):
    vr, vs = vr.copy(), vs.copy()
    best = prob.value(vr, vs)
    n_scan, xtol = cfg.scan_points, cfg.xtol

    def line_r(p):
        def f(x):
            t = vr.copy()
            t[p] = x
            return prob.value(t, vs)

        top = prob.max_feasible(vr, p)
        if top is None:
            return vr[p], -math.inf
        return _line_max(f, prob.lo[p], top, n_scan, xtol)

    def line_s(p):
        def f(x):
            t = vs.copy()
            t[p] = x
            return prob.value(vr, t)

        return _line_max(f, prob.lo[p], prob.hi_s[p], n_scan, xtol)

    def pair(p, q):
        # move v_r[p] while v_r[q] rides the capacity boundary
        def fill(x):
            t = vr.copy()
            t[p] = x
            y = prob.max_feasible(t, q)
            if y is None:
                return None
            t[q] = y
            return t

        def f(x):
            t = fill(x)
            return -math.inf if t is None else prob.value(t, vs)

        t = vr.copy()
        t[q] = prob.lo[q]
        top = prob.max_feasible(t, p)
        if top is None:
            return None, -math.inf
        x, fx = _line_max(f, prob.lo[p], top, n_scan, xtol)
        return fill(x), fx

    n = len(prob.r_coords)
    for _ in range(cfg.max_sweeps):
        before = best
        for p in prob.r_coords:
            x, fx = line_r(p)
            if fx > best:
                vr[p], best = x, fx
        for p in prob.s_coords:
            x, fx = line_s(p)
            if fx > best:
                vs[p], best = x, fx
        # single coordinates cannot slide along a binding capacity limit
        if n >= 2 and prob.hall_cap.size and not prob.feasible(np.minimum(vr + 1e-7, prob.hi_r)):
            for p in range(n):
                t, ft = pair(p, (p + 1) % n)
                if t is not None and ft > best:
                    vr, best = t, ft
        if best - before < cfg.tol:
            break
    return best, vr, vs


def _feasible_start(prob: _DesignProblem, vr):
    if prob.feasible(vr):
        return vr
    lo = prob.lo

    def ok(s):
        return prob.feasible(lo + s * (vr - lo))

    s = _bisect_feasible(ok, 0.0, 1.0)
    return lo + s * (vr - lo)


def optimize_prices(instance: Instance, design: Design, risk: RiskParams,
                    config: Optional[SolverConfig] = None,
                    hint: Optional[PriceVector] = None) -> tuple[PriceVector, Evaluation]:
    """Best prices found for a fixed design, with their full evaluation.

    Starts are equally spaced inside ``[d + eps, bound]``; ``hint`` adds one
    more start. Raises :class:`Infeasible` when no price vector is feasible.
    """
    cfg = config or SolverConfig()
    design.check(instance)
    prob = _DesignProblem(instance, design, risk, cfg.eps)
    if prob.empty:
        prices = PriceVector.empty(len(instance.nodes))
        return prices, evaluate(instance, design, prices, risk)[0]
    if not prob.bounds_ok():
        raise Infeasible("incentive bounds leave no room above the travel cost")
    if not prob.feasible(prob.lo):
        raise Infeasible("recovery capacity exceeded even at the lowest incentives")

    starts = []
    if hint is not None:
        hr = np.asarray(hint.v_r, dtype=float)[prob.served]
        hs = np.asarray(hint.v_s, dtype=float)[prob.served]
        hr = np.clip(np.where(np.isnan(hr), prob.lo, hr), prob.lo, prob.hi_r)
        hs = np.clip(np.where(np.isnan(hs), prob.lo, hs), prob.lo, prob.hi_s)
        starts.append((hr, hs))
    for s in range(cfg.starts):
        frac = (s + 1.0) / (cfg.starts + 1.0)
        starts.append((prob.lo + frac * (prob.hi_r - prob.lo),
                       prob.lo + frac * (prob.hi_s - prob.lo)))

    best = None
    for vr, vs in starts:
        vr = _feasible_start(prob, vr)
        val, vr, vs = _ascent(prob, vr, vs, cfg)
        if best is None or val > best[0]:
            best = (val, vr, vs)
    prices = prob.prices(best[1], best[2])
    return prices, evaluate(instance, design, prices, risk)[0]


# --------------------------------------------------------------------------
# full solve


def _better(obj: float, design: Design, inc_obj: float, inc_design: Design) -> bool:
    if obj > inc_obj + TIE_TOL:
        return True
    return abs(obj - inc_obj) <= TIE_TOL and design.sort_key() < inc_design.sort_key()


def solve(instance: Instance, risk: RiskParams,
          config: Optional[SolverConfig] = None) -> Solution:
    """Maximize the mean-risk objective over all designs and prices."""
    cfg = config or SolverConfig()
    bounds = _BoundModel(instance, risk, cfg.eps)
    designs = list(enumerate_designs(instance))
    # best-first over (bound, canonical index); a bound is tightened lazily
    # the first time its design reaches the top of the heap
    heap = []
    for n, design in enumerate(designs[1:], start=1):
        ub, vr, vs = bounds.bound(design)
        if ub > -math.inf:
            heap.append((-ub, n, False, vr, vs))
    heapq.heapify(heap)

    empty = designs[0]
    prices, ev = optimize_prices(instance, empty, risk, cfg)
    best = (ev.objective, empty, prices)
    evaluated = tightened = 0
    while heap:
        neg_ub, n, tight, vr, vs = heapq.heappop(heap)
        margin = 1e-6 * max(1.0, abs(best[0]))
        if cfg.prune and -neg_ub < best[0] - margin:
            break
        design = designs[n]
        if cfg.prune and not tight and bounds.overloaded(design, vr).any():
            tightened += 1
            ub2, vr2, vs2 = bounds.tightened(design)
            heapq.heappush(heap, (-ub2, n, True, vr2, vs2))
            continue
        try:
            prices, ev = optimize_prices(instance, design, risk, cfg, hint=PriceVector(vr, vs))
        except Infeasible:
            continue
        evaluated += 1
        if _better(ev.objective, design, best[0], best[1]):
            best = (ev.objective, design, prices)

    _, design, prices = best
    ev, table, plans = evaluate(instance, design, prices, risk)
    stats = {"designs": len(designs), "evaluated": evaluated, "tightened": tightened}
    return Solution(design, prices, ev, table, plans, stats)
