import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revlog.flows import (
    FlowPlan,
    Infeasible,
    _successive_shortest_paths,
    _two_sink_transport,
    check_capacity,
    max_routable_fraction,
    routable,
    route_flows,
)
from revlog.oracle import route_bruteforce_integer, route_vertex_enum


def test_single_center_takes_cheaper_arc():
    plan = route_flows([100.0], [[1.0, 2.0]], [2000, 2000])
    np.testing.assert_array_equal(plan.shipped, [[100.0, 0.0]])
    assert plan.cost == 100.0


def test_zero_supply_is_free():
    plan = route_flows([0.0, 0.0], [[1.0, 2.0], [3.0, 1.0]], [10, 10])
    assert plan.cost == 0.0 and not plan.shipped.any()


def test_forced_split_matches_bruteforce():
    # both prefer recovery center 0 but it only holds 100
    cost = np.array([[1.0, 5.0], [1.0, 2.0]])
    plan = route_flows([60.0, 60.0], cost, [100, 100])
    assert plan.cost == route_bruteforce_integer([60, 60], cost, [100, 100])
    np.testing.assert_allclose(plan.shipped, [[60, 0], [40, 20]])


def test_check_capacity_examples():
    assert check_capacity(np.array([[1999.0, 0.0]]), [2000, 2000])
    assert check_capacity(np.array([[2000 + 1e-12, 0.0]]), [2000, 2000])
    assert not check_capacity(np.array([[2001.0, 0.0]]), [2000, 2000])


def test_check_capacity_accepts_plans_and_stacks():
    plans = [FlowPlan(np.array([[1.0, 0.0]]), 1.0), FlowPlan(np.array([[3.0, 0.0]]), 3.0)]
    assert check_capacity(plans, [3, 0])
    assert not check_capacity(plans, [2.5, 0])
    assert check_capacity(plans[0], [1, 0])
    assert not check_capacity(np.stack([p.shipped for p in plans]), [2.5, 0])


def test_overflow_raises():
    with pytest.raises(Infeasible):
        route_flows([150.0], [[1.0, np.nan]], [100, 1000])


def test_dead_center_raises():
    with pytest.raises(Infeasible):
        route_flows([1.0], [[np.nan, np.nan]], [10, 10])


def test_inactive_arcs_are_unused():
    plan = route_flows([5.0], [[1.0, 2.0]], [10, 10], active_arcs=[[False, True]])
    np.testing.assert_array_equal(plan.shipped, [[0.0, 5.0]])
    assert plan.cost == 10.0


def test_routable_fraction():
    assert max_routable_fraction([50.0, 50.0], [[1.0], [1.0]], [80]) == pytest.approx(0.8)
    assert routable([40.0, 40.0], [[1.0], [1.0]], [80])
    assert not routable([40.0, 41.0], [[1.0], [1.0]], [80])


@st.composite
def small_problems(draw, max_i=3, max_j=3, qmax=50):
    I = draw(st.integers(1, max_i))
    J = draw(st.integers(1, max_j))
    cost = np.array([[draw(st.one_of(st.just(np.nan), st.integers(0, 9).map(float)))
                      for _ in range(J)] for _ in range(I)])
    supply = np.array([draw(st.integers(0, qmax)) for _ in range(I)], dtype=float)
    cap = np.array([draw(st.integers(0, 2 * qmax)) for _ in range(J)], dtype=float)
    return supply, cost, cap


@settings(max_examples=150, deadline=None)
@given(small_problems(max_i=3, max_j=3, qmax=12))
def test_routing_matches_integer_enumeration(problem):
    supply, cost, cap = problem
    expected = route_bruteforce_integer(supply, cost, cap)
    try:
        plan = route_flows(supply, cost, cap)
    except Infeasible:
        assert expected == np.inf
        return
    assert plan.cost == pytest.approx(expected, abs=1e-9)
    assert check_capacity(plan, cap)
    arcs = ~np.isnan(cost)
    assert not plan.shipped[~arcs].any()
    np.testing.assert_allclose(plan.shipped.sum(axis=1), supply, atol=1e-9)


@settings(max_examples=300, deadline=None)
@given(small_problems(max_i=3, max_j=3, qmax=50))
def test_routing_matches_dual_vertices(problem):
    supply, cost, cap = problem
    expected = route_vertex_enum(supply, cost, cap)
    try:
        plan = route_flows(supply, cost, cap)
    except Infeasible:
        assert expected == np.inf
        return
    assert plan.cost == pytest.approx(expected, abs=1e-7)
    assert check_capacity(plan, cap)


def test_routing_matches_integer_enumeration_at_fifty():
    rng = np.random.default_rng(3)
    for _ in range(20):
        cost = rng.integers(0, 10, (3, 3)).astype(float)
        supply = rng.integers(0, 51, 3).astype(float)
        cap = rng.integers(20, 80, 3).astype(float)
        expected = route_bruteforce_integer(supply, cost, cap)
        try:
            got = route_flows(supply, cost, cap).cost
        except Infeasible:
            got = np.inf
        assert got == pytest.approx(expected, abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(small_problems(max_i=4, max_j=2, qmax=50))
def test_two_sink_routine_agrees_with_ssp(problem):
    supply, cost, cap = problem
    if cost.shape[1] != 2:
        return
    arcs = ~np.isnan(cost)
    supply = np.where(arcs.any(axis=1), supply, 0.0)
    if not routable(supply, cost, cap):
        return
    c = np.where(arcs, cost, 0.0)
    f1, l1 = _two_sink_transport(supply, c, arcs, cap)
    f2, l2 = _successive_shortest_paths(supply, c, arcs, cap)
    assert l1.max(initial=0) <= 1e-9 and l2.max(initial=0) <= 1e-9
    assert float((f1 * c).sum()) == pytest.approx(float((f2 * c).sum()), abs=1e-7)
