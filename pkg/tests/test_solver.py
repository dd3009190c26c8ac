import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revlog.design import Design, RiskParams
from revlog.flows import check_capacity
from revlog.instance import parse_instance, reference_instance
from revlog.oracle import grid_solve, micro_instances
from revlog.risk import evaluate
from revlog.solver import (
    SolverConfig,
    _logit_profit_max,
    count_designs,
    enumerate_designs,
    optimize_prices,
    solve,
)


def tiny(beta=0.5, P=5.0, C=3.0, f=1.0, u=2.0, R=20.0, travel=1.0, h=0.1, cap=1000.0):
    return parse_instance({
        "nodes": ["a"], "centers": ["c"], "recovery_centers": ["r"],
        "travel_cost": [[travel]], "ship_cost": [[0.2]], "fixed_cost": [f],
        "utility": [u], "values": {"P": P, "C": C, "C_rem": 1.0},
        "quality": [{"beta": beta, "h": h}], "capacity": [cap],
        "scenarios": [{"prob": 1, "quantities": [R]}],
    })


def check_solution(inst, sol, risk):
    """Independent re-check of everything a returned solution promises."""
    design, prices = sol.design, sol.prices
    design.check(inst)
    beta = inst.quality[design.cutoff].beta
    for k, i in enumerate(design.assignment):
        if i is None:
            assert np.isnan(prices.v_r[k]) and np.isnan(prices.v_s[k])
            continue
        d = inst.travel_cost[k, i]
        if beta > 0:
            assert d + 1e-6 - 1e-12 <= prices.v_r[k] <= inst.reman_value + 1e-12
        else:
            assert np.isnan(prices.v_r[k])
        if beta < 1:
            assert d + 1e-6 - 1e-12 <= prices.v_s[k] <= inst.scrap_value + 1e-12
        else:
            assert np.isnan(prices.v_s[k])
    assert check_capacity(sol.flows, inst.capacity)
    collected = sol.demand.collected()
    for t, plan in enumerate(sol.flows):
        np.testing.assert_allclose(plan.shipped.sum(axis=1), collected[t], rtol=0, atol=1e-9)
        assert not plan.shipped[np.isnan(inst.ship_cost)].any()
    ev = evaluate(inst, design, prices, risk)[0]
    assert ev.objective == pytest.approx(sol.objective, abs=1e-6)


def test_trivial_design_count():
    inst = tiny()
    designs = list(enumerate_designs(inst))
    assert count_designs(inst) == 3 == len(designs)
    assert {d.assignment for d in designs} == {(None,), (0,)}
    assert designs[0].is_empty


def test_reference_design_space():
    inst = reference_instance()
    designs = list(enumerate_designs(inst))
    assert len(designs) == count_designs(inst) == 4191
    assert len({(d.open_centers, d.assignment, d.cutoff) for d in designs}) == len(designs)
    assert sum(d.is_empty for d in designs) == 1
    assert {d.assignment[2] for d in designs} == {None, 1}
    for d in designs[:: 97]:
        d.check(inst)


def test_node_without_arcs_never_assigned():
    inst = parse_instance({
        "nodes": ["a", "b"], "centers": ["c"], "recovery_centers": ["r"],
        "travel_cost": [[1.0], [None]], "ship_cost": [[0.2]], "fixed_cost": [1],
        "utility": [2, 2], "values": {"P": 5, "C": 3, "C_rem": 1},
        "quality": [{"beta": 0.5, "h": 0.1}], "capacity": [100],
        "scenarios": [{"prob": 1, "quantities": [10, 10]}],
    })
    assert all(d.assignment[1] is None for d in enumerate_designs(inst))


@st.composite
def topologies(draw):
    K = draw(st.integers(1, 3))
    I = draw(st.integers(1, 3))
    Q = draw(st.integers(1, 3))
    arcs = [[draw(st.booleans()) for _ in range(I)] for _ in range(K)]
    return parse_instance({
        "nodes": [f"n{k}" for k in range(K)], "centers": [f"c{i}" for i in range(I)],
        "recovery_centers": ["r"],
        "travel_cost": [[1.0 if a else None for a in row] for row in arcs],
        "ship_cost": [[1.0] for _ in range(I)], "fixed_cost": [1.0] * I,
        "utility": [1.0] * K, "values": {"P": 5, "C": 3, "C_rem": 1},
        "quality": [{"beta": q / Q, "h": q / Q} for q in range(Q)], "capacity": [10],
        "scenarios": [{"prob": 1, "quantities": [1.0] * K}],
    })


@settings(max_examples=60, deadline=None)
@given(topologies())
def test_enumeration_matches_count_formula(inst):
    designs = list(enumerate_designs(inst))
    assert len(designs) == count_designs(inst)
    assert len(set(designs)) == len(designs)
    for d in designs:
        d.check(inst)
        assert d.is_empty or any(d.open_centers)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.1, 100), st.floats(0.01, 10), st.floats(-5, 5),
       st.floats(-5, 5), st.floats(0.01, 20))
def test_logit_profit_max_beats_dense_grid(A, B, c, lo, width):
    hi = lo + width
    val, v = _logit_profit_max(A, B, c, lo, hi)
    assert lo <= v <= hi
    grid = np.linspace(lo, hi, 20001)
    f = (A - B * grid) / (1 + np.exp(-(grid - c)))
    assert val >= f.max() - 1e-12 * (1 + abs(f.max()))
    assert val == pytest.approx((A - B * v) / (1 + math.exp(-(v - c))), rel=1e-12, abs=1e-300)


def test_center_without_nodes_costs_its_fixed_charge():
    inst = reference_instance()
    design = Design((False, True, True), (None,) * 6, 2)
    prices, ev = optimize_prices(inst, design, RiskParams(0.9, 0.6))
    assert np.all(np.isnan(prices.v_r)) and np.all(np.isnan(prices.v_s))
    assert ev.objective == pytest.approx(-(1.6) * (1200 + 1100))


def test_scrap_only_cutoff_has_no_reman_price():
    inst = reference_instance()
    design = Design((True, False, False), (0, 0, None, 0, None, 0), 0)
    prices, ev = optimize_prices(inst, design, RiskParams(0.9, 0))
    assert np.all(np.isnan(prices.v_r))
    served = [0, 1, 3, 5]
    assert np.all(prices.v_s[served] > inst.travel_cost[served, 0])
    assert ev.revenue_reman == 0 and ev.transport == 0


def test_unreachable_everywhere_gives_empty_design():
    inst = parse_instance({
        "nodes": ["a"], "centers": ["c"], "recovery_centers": ["r"],
        "travel_cost": [[None]], "ship_cost": [[0.2]], "fixed_cost": [1],
        "utility": [2], "values": {"P": 5, "C": 3, "C_rem": 1},
        "quality": [{"beta": 0.5, "h": 0.1}], "capacity": [100],
        "scenarios": [{"prob": 1, "quantities": [10]}],
    })
    sol = solve(inst, RiskParams(0.5, 0.3))
    assert sol.design.is_empty and sol.objective == 0


def test_single_node_matches_grid_oracle():
    inst = tiny()
    risk = RiskParams(0.5, 0.0)
    sol = solve(inst, risk)
    grid = grid_solve(inst, risk, price_step=0.001)
    assert abs(sol.objective - grid.objective) <= 0.01
    assert sol.objective >= grid.objective - 1e-9
    check_solution(inst, sol, risk)


def test_huge_fixed_cost_means_staying_out():
    inst = tiny(f=1e6)
    risk = RiskParams(0.5, 0.0)
    assert solve(inst, risk).design.is_empty
    assert grid_solve(inst, risk, price_step=0.01).design.is_empty


def test_capacity_binds_on_tight_instance():
    inst = tiny(beta=1.0, P=10.0, R=100.0, cap=30.0, u=4.0)
    risk = RiskParams(0.5, 0.0)
    sol = solve(inst, risk)
    check_solution(inst, sol, risk)
    assert sol.flows[0].shipped.sum() == pytest.approx(30.0, abs=1e-6)


def test_pruning_does_not_change_the_answer():
    for inst in micro_instances(6):
        for risk in (RiskParams(0.5, 0.0), RiskParams(0.9, 1.0)):
            a = solve(inst, risk)
            b = solve(inst, risk, SolverConfig(prune=False))
            assert a.objective == pytest.approx(b.objective, abs=1e-7)
            check_solution(inst, a, risk)


def test_deterministic():
    inst = micro_instances(1)[0]
    risk = RiskParams(0.9, 0.3)
    a, b = solve(inst, risk), solve(inst, risk)
    assert a.design == b.design
    assert a.prices == b.prices
    assert a.objective == b.objective


def test_reference_solution_invariants_and_high_risk_aversion():
    inst = reference_instance()
    risk = RiskParams(0.9, 1.0)
    sol = solve(inst, risk)
    check_solution(inst, sol, risk)
    assert sol.objective > 0
    cautious = solve(inst, RiskParams(0.99, 10.0))
    assert cautious.design.is_empty or inst.quality[cautious.design.cutoff].beta == 0
    assert cautious.objective <= sol.objective
