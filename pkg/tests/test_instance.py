import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revlog.instance import (
    InstanceError,
    InstanceSyntaxError,
    ScenarioSpec,
    parse_instance,
    realize_scenarios,
    reference_instance,
    scenario_spec_from_document,
    serialize_instance,
)


def minimal_doc(**overrides):
    doc = {
        "nodes": ["a"],
        "centers": ["c"],
        "recovery_centers": ["r"],
        "travel_cost": [[1.0]],
        "ship_cost": [[0.5]],
        "fixed_cost": [10],
        "utility": [2],
        "values": {"P": 50, "C": 5, "C_rem": 20},
        "quality": [{"beta": 0.5, "h": 0.1}],
        "capacity": [100],
        "scenarios": [{"prob": 0.5, "quantities": [10]}, {"prob": 0.5, "quantities": [20]}],
    }
    doc.update(overrides)
    return doc


def test_reference_shape_and_table_values():
    inst = reference_instance()
    assert len(inst.nodes) == 6 and len(inst.centers) == 3
    assert len(inst.quality) == 5 and inst.n_scenarios == 3
    np.testing.assert_array_equal(inst.utility, [40, 60, 60, 40, 80, 40])
    np.testing.assert_array_equal(inst.fixed_cost, [1000, 1200, 1100])
    np.testing.assert_array_equal(inst.betas, [0, 0.2, 0.4, 0.8, 1])
    np.testing.assert_array_equal(inst.hs, [0.05, 0.1, 0.15, 0.4, 0.5])
    np.testing.assert_array_equal(inst.probs, [0.25, 0.5, 0.25])
    assert inst.scrap_value == 5 and inst.reman_fixed_cost == 20
    np.testing.assert_array_equal(inst.capacity, [2000, 2000])


def test_reference_missing_arc_node1_center2():
    inst = reference_instance()
    assert not inst.node_center_arcs[0, 1]
    assert inst.node_center_arcs[0, 0] and inst.node_center_arcs[0, 2]
    # node 3 reaches only center 2
    np.testing.assert_array_equal(inst.node_center_arcs[2], [False, True, False])


def test_minimal_two_scenarios():
    inst = parse_instance(json.dumps(minimal_doc()))
    assert inst.n_scenarios == 2
    np.testing.assert_array_equal(inst.quantities[:, 0], [10, 20])


def test_probabilities_must_sum_to_one():
    doc = minimal_doc(scenarios=[{"prob": 0.6, "quantities": [1]}, {"prob": 0.6, "quantities": [1]}])
    with pytest.raises(InstanceError) as err:
        parse_instance(json.dumps(doc))
    assert "probabilities sum to 1.2" in err.value.problems


def test_syntax_error_reports_position():
    with pytest.raises(InstanceSyntaxError) as err:
        parse_instance('{"nodes": [1,,]}')
    assert err.value.line == 1 and err.value.column == 14
    assert "line 1, column 14" in str(err.value)


def test_every_violation_is_listed():
    doc = minimal_doc(utility=[-1], capacity=[0],
                      quality=[{"beta": 0.8, "h": 0.1}, {"beta": 0.2, "h": 0.05}])
    with pytest.raises(InstanceError) as err:
        parse_instance(json.dumps(doc))
    text = " | ".join(err.value.problems)
    assert len(err.value.problems) >= 4
    assert "utility" in text and "capacity" in text and "beta" in text and "h" in text


def test_missing_keys_reported():
    doc = minimal_doc()
    del doc["capacity"], doc["values"]
    with pytest.raises(InstanceError) as err:
        parse_instance(doc)
    assert len(err.value.problems) == 2


def test_unreachable_node_is_not_fatal():
    doc = minimal_doc(nodes=["a", "b"], travel_cost=[[1.0], [None]], utility=[2, 3],
                      scenarios=[{"prob": 1, "quantities": [1, 2]}])
    inst = parse_instance(doc)
    assert inst.unreachable_nodes == ("b",)


def test_midpoint_realization_of_reference():
    inst = reference_instance()
    np.testing.assert_array_equal(inst.quantities, np.repeat([[250.0], [750.0], [1250.0]], 6, axis=1))


def test_degenerate_range_both_modes():
    spec = ScenarioSpec(np.array([1.0]), np.array([[100.0]]), np.array([[100.0]]))
    for mode in ("midpoint", "sample"):
        _, q = realize_scenarios(spec, mode, seed=3)
        assert q[0, 0] == 100.0


def test_sample_mode_is_seeded():
    spec = scenario_spec_from_document(reference_instance_doc())
    _, a = realize_scenarios(spec, "sample", seed=42)
    _, b = realize_scenarios(spec, "sample", seed=42)
    _, c = realize_scenarios(spec, "sample", seed=43)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


def test_unknown_mode_rejected():
    spec = ScenarioSpec(np.array([1.0]), np.array([[0.0]]), np.array([[1.0]]))
    with pytest.raises(ValueError):
        realize_scenarios(spec, "median")


def test_arrays_are_read_only():
    inst = reference_instance()
    with pytest.raises(ValueError):
        inst.travel_cost[0, 0] = 3.0


def reference_instance_doc():
    from pathlib import Path

    import revlog.instance as mod

    return Path(mod.__file__).with_name("data").joinpath("reference.json").read_text()


@pytest.mark.parametrize("mode", ["midpoint", "sample"])
def test_round_trip_reference(mode):
    inst = reference_instance(scenario_mode=mode, seed=5)
    again = parse_instance(serialize_instance(inst))
    assert again == inst


@st.composite
def instance_docs(draw):
    K = draw(st.integers(1, 3))
    I = draw(st.integers(1, 3))
    J = draw(st.integers(1, 2))
    S = draw(st.integers(1, 3))
    pos = st.floats(0.01, 100, allow_nan=False)
    cost = st.one_of(st.none(), st.floats(0, 10, allow_nan=False))
    betas = sorted(draw(st.lists(st.floats(0, 1), min_size=1, max_size=3)))
    hs = sorted(draw(st.lists(st.floats(0, 1), min_size=len(betas), max_size=len(betas))))
    weights = draw(st.lists(st.integers(1, 10), min_size=S, max_size=S))
    probs = [w / sum(weights) for w in weights]
    probs[-1] = 1.0 - sum(probs[:-1])
    ranges = []
    for _ in range(S):
        lo = draw(st.floats(0, 50))
        ranges.append([lo, lo + draw(st.floats(0, 50))])
    return {
        "nodes": [f"n{k}" for k in range(K)],
        "centers": [f"c{i}" for i in range(I)],
        "recovery_centers": [f"r{j}" for j in range(J)],
        "travel_cost": [[draw(cost) for _ in range(I)] for _ in range(K)],
        "ship_cost": [[draw(cost) for _ in range(J)] for _ in range(I)],
        "fixed_cost": [draw(st.floats(0, 100)) for _ in range(I)],
        "utility": [draw(pos) for _ in range(K)],
        "values": {"P": draw(pos), "C": draw(pos), "C_rem": draw(pos)},
        "quality": [{"beta": b, "h": h} for b, h in zip(betas, hs)],
        "capacity": [draw(pos) for _ in range(J)],
        "scenarios": [{"prob": p, "uniform": r} for p, r in zip(probs, ranges)],
    }


@settings(max_examples=60, deadline=None)
@given(instance_docs(), st.integers(0, 2**31 - 1))
def test_round_trip_and_masks_property(doc, seed):
    inst = parse_instance(json.dumps(doc), scenario_mode="sample", seed=seed)
    assert parse_instance(serialize_instance(inst)) == inst
    present = np.array([[x is not None for x in row] for row in doc["travel_cost"]])
    np.testing.assert_array_equal(inst.node_center_arcs, present)
    present = np.array([[x is not None for x in row] for row in doc["ship_cost"]])
    np.testing.assert_array_equal(inst.center_recovery_arcs, present)


@settings(max_examples=60, deadline=None)
@given(instance_docs(), st.integers(0, 2**31 - 1))
def test_realized_quantities_within_ranges(doc, seed):
    spec = scenario_spec_from_document(json.dumps(doc))
    for mode in ("midpoint", "sample"):
        _, q = realize_scenarios(spec, mode, seed)
        assert np.all(q >= spec.lo) and np.all(q <= spec.hi)
