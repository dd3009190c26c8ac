"""Problem instances: network, costs, quality ladder and return scenarios.

An instance document is a single JSON object::

    {
      "nodes": ["1", "2"],                 # demand nodes (index k)
      "centers": ["A", "B"],               # candidate collection centers (index i)
      "recovery_centers": ["R1"],          # recovery centers (index j)
      "travel_cost": [[1.7, null], ...],   # d_ki, null = no path
      "ship_cost": [[0.8], [1.2]],         # a_ij, null = no path
      "fixed_cost": [1000, 1200],          # f_i
      "utility": [40, 60],                 # u_k, competitor attraction mass
      "values": {"P": 50, "C": 5, "C_rem": 20},
      "quality": [{"beta": 0, "h": 0.05}, ...],
      "capacity": [2000],                  # CC_j
      "scenarios": [
        {"prob": 0.25, "uniform": [0, 500]},          # same range for every node
        {"prob": 0.5, "uniform": [[0, 10], [5, 9]]},  # one range per node
        {"prob": 0.25, "quantities": [120, 80]}
      ]
    }

Scenario quantities given as uniform ranges are turned into concrete
return quantities by :func:`realize_scenarios`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-9

__all__ = [
    "Instance",
    "InstanceError",
    "InstanceSyntaxError",
    "QualityLevel",
    "ScenarioSpec",
    "load_instance",
    "parse_instance",
    "realize_scenarios",
    "reference_instance",
    "scenario_spec_from_document",
    "serialize_instance",
]


class InstanceError(ValueError):
    """Raised when an instance document violates one or more invariants."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class InstanceSyntaxError(InstanceError):
    """Raised when the document is not well-formed JSON."""

    def __init__(self, msg: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__([f"line {line}, column {column}: {msg}"])


@dataclass(frozen=True)
class QualityLevel:
    beta: float  # fraction of returns good enough to remanufacture
    h: float  # remanufacturing cost coefficient


def _frozen(a: Any) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Scenario probabilities with a uniform(lo, hi) range per node.

    Fixed quantities are represented with ``lo == hi``.
    """

    probs: np.ndarray  # (n_scenarios,)
    lo: np.ndarray  # (n_scenarios, n_nodes)
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs))
        object.__setattr__(self, "lo", _frozen(self.lo))
        object.__setattr__(self, "hi", _frozen(self.hi))
        problems = []
        if self.lo.shape != self.hi.shape or self.lo.shape[0] != self.probs.shape[0]:
            problems.append("scenario ranges do not match the number of scenarios")
        elif np.any(self.lo > self.hi):
            problems.append("scenario range with lo > hi")
        if np.any(self.lo < 0):
            problems.append("negative return quantity")
        if np.any(self.probs <= 0) or np.any(self.probs > 1):
            problems.append("scenario probabilities must lie in (0, 1]")
        if abs(float(self.probs.sum()) - 1.0) > PROB_TOL:
            problems.append(f"probabilities sum to {float(self.probs.sum()):g}")
        if problems:
            raise InstanceError(problems)


def realize_scenarios(
    spec: ScenarioSpec, mode: str = "midpoint", seed: int = 42
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(probs, quantities)`` with concrete quantities per scenario and node.

    ``midpoint`` uses ``(lo + hi) / 2``; ``sample`` draws uniformly with a
    generator seeded by ``seed``, so equal seeds give identical matrices.
    """
    if mode == "midpoint":
        q = (spec.lo + spec.hi) / 2.0
    elif mode == "sample":
        rng = np.random.default_rng(seed)
        q = rng.uniform(spec.lo, spec.hi)
        q = np.clip(q, spec.lo, spec.hi)
    else:
        raise ValueError(f"unknown scenario mode {mode!r}")
    return np.array(spec.probs), q


@dataclass(frozen=True, eq=False)
class Instance:
    """A fully realized problem instance. Immutable after construction."""

    nodes: tuple[str, ...]
    centers: tuple[str, ...]
    recovery_centers: tuple[str, ...]
    travel_cost: np.ndarray  # (K, I), nan = no path
    ship_cost: np.ndarray  # (I, J), nan = no path
    fixed_cost: np.ndarray  # (I,)
    utility: np.ndarray  # (K,)
    reman_value: float
    scrap_value: float
    reman_fixed_cost: float
    quality: tuple[QualityLevel, ...]
    capacity: np.ndarray  # (J,)
    probs: np.ndarray  # (S,)
    quantities: np.ndarray  # (S, K)

    def __post_init__(self):
        for name in ("travel_cost", "ship_cost", "fixed_cost", "utility",
                     "capacity", "probs", "quantities"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("nodes", "centers", "recovery_centers", "quality"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        problems = self.validate()
        if problems:
            raise InstanceError(problems)

    # derived ------------------------------------------------------------
    @property
    def node_center_arcs(self) -> np.ndarray:
        """p_ki: True where a travel path from node k to center i exists."""
        return ~np.isnan(self.travel_cost)

    @property
    def center_recovery_arcs(self) -> np.ndarray:
        """p_ij: True where center i can ship to recovery center j."""
        return ~np.isnan(self.ship_cost)

    @property
    def unreachable_nodes(self) -> tuple[str, ...]:
        mask = ~self.node_center_arcs.any(axis=1)
        return tuple(n for n, m in zip(self.nodes, mask) if m)

    @property
    def betas(self) -> np.ndarray:
        return np.array([q.beta for q in self.quality])

    @property
    def hs(self) -> np.ndarray:
        return np.array([q.h for q in self.quality])

    @property
    def n_scenarios(self) -> int:
        return len(self.probs)

    def with_scenarios(self, probs, quantities) -> "Instance":
        return Instance(
            nodes=self.nodes,
            centers=self.centers,
            recovery_centers=self.recovery_centers,
            travel_cost=self.travel_cost,
            ship_cost=self.ship_cost,
            fixed_cost=self.fixed_cost,
            utility=self.utility,
            reman_value=self.reman_value,
            scrap_value=self.scrap_value,
            reman_fixed_cost=self.reman_fixed_cost,
            quality=self.quality,
            capacity=self.capacity,
            probs=probs,
            quantities=quantities,
        )

    def validate(self) -> list[str]:
        K, I, J = len(self.nodes), len(self.centers), len(self.recovery_centers)
        problems: list[str] = []
        for label, ids in (("nodes", self.nodes), ("centers", self.centers),
                           ("recovery_centers", self.recovery_centers)):
            if not ids:
                problems.append(f"{label} must not be empty")
            if len(set(ids)) != len(ids):
                problems.append(f"{label} contains duplicate identifiers")

        def shape(name, arr, expected):
            if arr.shape != expected:
                problems.append(f"{name} has shape {arr.shape}, expected {expected}")
                return False
            return True

        if shape("travel_cost", self.travel_cost, (K, I)):
            if np.any(self.travel_cost[~np.isnan(self.travel_cost)] < 0):
                problems.append("travel_cost entries must be >= 0")
        if shape("ship_cost", self.ship_cost, (I, J)):
            if np.any(self.ship_cost[~np.isnan(self.ship_cost)] < 0):
                problems.append("ship_cost entries must be >= 0")
        if shape("fixed_cost", self.fixed_cost, (I,)) and np.any(~(self.fixed_cost >= 0)):
            problems.append("fixed_cost entries must be >= 0")
        if shape("utility", self.utility, (K,)) and np.any(~(self.utility > 0)):
            problems.append("utility entries must be > 0")
        if shape("capacity", self.capacity, (J,)) and np.any(~(self.capacity > 0)):
            problems.append("capacity entries must be > 0")
        for name, val in (("P", self.reman_value), ("C", self.scrap_value),
                          ("C_rem", self.reman_fixed_cost)):
            if not (math.isfinite(val) and val > 0):
                problems.append(f"value {name} must be > 0")

        if not self.quality:
            problems.append("quality ladder must not be empty")
        betas = [q.beta for q in self.quality]
        hs = [q.h for q in self.quality]
        if any(not 0 <= b <= 1 for b in betas):
            problems.append("quality beta must lie in [0, 1]")
        if any(not h >= 0 for h in hs):
            problems.append("quality h must be >= 0")
        if any(b1 < b0 for b0, b1 in zip(betas, betas[1:])):
            problems.append("quality beta must be non-decreasing along the ladder")
        if any(h1 < h0 for h0, h1 in zip(hs, hs[1:])):
            problems.append("quality h must be non-decreasing along the ladder")

        S = self.probs.shape[0] if self.probs.ndim == 1 else -1
        if S < 1:
            problems.append("at least one scenario is required")
        else:
            if np.any(~(self.probs > 0)) or np.any(self.probs > 1):
                problems.append("scenario probabilities must lie in (0, 1]")
            total = float(self.probs.sum())
            if abs(total - 1.0) > PROB_TOL:
                problems.append(f"probabilities sum to {total:g}")
            if shape("quantities", self.quantities, (S, K)):
                if np.any(~(self.quantities >= 0)):
                    problems.append("return quantities must be >= 0")
        return problems

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        arrays = ("travel_cost", "ship_cost", "fixed_cost", "utility",
                  "capacity", "probs", "quantities")
        return (
            self.nodes == other.nodes
            and self.centers == other.centers
            and self.recovery_centers == other.recovery_centers
            and self.quality == other.quality
            and (self.reman_value, self.scrap_value, self.reman_fixed_cost)
            == (other.reman_value, other.scrap_value, other.reman_fixed_cost)
            and all(
                getattr(self, a).shape == getattr(other, a).shape
                and np.array_equal(getattr(self, a), getattr(other, a), equal_nan=True)
                for a in arrays
            )
        )

    __hash__ = None


# --------------------------------------------------------------------------
# parsing


def _load_document(document) -> Mapping[str, Any]:
    if isinstance(document, Mapping):
        return document
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document, parse_float=Decimal, parse_int=Decimal)
    except json.JSONDecodeError as exc:
        raise InstanceSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise InstanceError(["instance document must be a JSON object"])
    return doc


def _num(x, where: str, problems: list[str], allow_null=False):
    if x is None:
        if allow_null:
            return math.nan
        problems.append(f"{where}: missing number")
        return math.nan
    if isinstance(x, bool) or not isinstance(x, (int, float, Decimal)):
        problems.append(f"{where}: expected a number, got {x!r}")
        return math.nan
    return float(x)


def _vector(doc, key, problems, allow_null=False):
    v = doc.get(key)
    if not isinstance(v, list):
        problems.append(f"{key}: expected an array")
        return []
    return [_num(x, f"{key}[{i}]", problems, allow_null) for i, x in enumerate(v)]


def _matrix(doc, key, rows, cols, problems):
    m = doc.get(key)
    if not isinstance(m, list) or len(m) != rows:
        problems.append(f"{key}: expected an array of {rows} rows")
        return np.full((rows, cols), np.nan)
    out = np.full((rows, cols), np.nan)
    for r, row in enumerate(m):
        if not isinstance(row, list) or len(row) != cols:
            problems.append(f"{key}[{r}]: expected {cols} entries")
            continue
        for c, x in enumerate(row):
            out[r, c] = _num(x, f"{key}[{r}][{c}]", problems, allow_null=True)
    return out


def scenario_spec_from_document(document) -> ScenarioSpec:
    """Extract the scenario description (probabilities and per-node ranges)."""
    doc = _load_document(document)
    problems: list[str] = []
    K = len(doc.get("nodes") or [])
    scen = doc.get("scenarios")
    if not isinstance(scen, list) or not scen:
        raise InstanceError(["scenarios: expected a non-empty array"])
    probs, lo, hi = [], [], []
    exact_total = Decimal(0)
    for t, s in enumerate(scen):
        where = f"scenarios[{t}]"
        if not isinstance(s, dict):
            problems.append(f"{where}: expected an object")
            continue
        p = s.get("prob")
        probs.append(_num(p, f"{where}.prob", problems))
        if isinstance(p, (Decimal, int)) and not isinstance(p, bool):
            exact_total += Decimal(p)
        else:
            exact_total += Decimal(repr(float(probs[-1]))) if math.isfinite(probs[-1]) else 0
        if "quantities" in s:
            q = s["quantities"]
            if not isinstance(q, list) or len(q) != K:
                problems.append(f"{where}.quantities: expected {K} entries")
                q = [math.nan] * K
            vals = [_num(x, f"{where}.quantities[{k}]", problems) for k, x in enumerate(q)]
            lo.append(vals)
            hi.append(vals)
        elif "uniform" in s:
            u = s["uniform"]
            pairs = None
            if isinstance(u, list) and len(u) == 2 and not isinstance(u[0], list):
                pairs = [u] * K
            elif isinstance(u, list) and len(u) == K and all(
                isinstance(x, list) and len(x) == 2 for x in u
            ):
                pairs = u
            if pairs is None:
                problems.append(f"{where}.uniform: expected [lo, hi] or {K} such pairs")
                pairs = [[math.nan, math.nan]] * K
            lo.append([_num(a, f"{where}.uniform lo", problems) for a, _ in pairs])
            hi.append([_num(b, f"{where}.uniform hi", problems) for _, b in pairs])
        else:
            problems.append(f"{where}: needs 'quantities' or 'uniform'")
            lo.append([math.nan] * K)
            hi.append([math.nan] * K)
    if abs(exact_total - 1) > Decimal("1e-9"):
        problems.append(f"probabilities sum to {exact_total.normalize()}")
    if problems:
        raise InstanceError(problems)
    shape = (len(scen), K)
    return ScenarioSpec(np.array(probs),
                        np.array(lo, dtype=float).reshape(shape),
                        np.array(hi, dtype=float).reshape(shape))


def parse_instance(document, *, scenario_mode: str = "midpoint", seed: int = 42) -> Instance:
    """Parse and validate an instance document (JSON text or an already-loaded mapping).

    Every violated invariant is reported in one :class:`InstanceError`.
    """
    doc = _load_document(document)
    problems: list[str] = []
    for key in ("nodes", "centers", "recovery_centers", "travel_cost", "ship_cost",
                "fixed_cost", "utility", "values", "quality", "capacity", "scenarios"):
        if key not in doc:
            problems.append(f"missing key {key!r}")
    if problems:
        raise InstanceError(problems)

    ids = {}
    for key in ("nodes", "centers", "recovery_centers"):
        v = doc[key]
        if not isinstance(v, list):
            problems.append(f"{key}: expected an array")
            v = []
        ids[key] = tuple(str(x) for x in v)
    K, I, J = len(ids["nodes"]), len(ids["centers"]), len(ids["recovery_centers"])

    travel = _matrix(doc, "travel_cost", K, I, problems)
    ship = _matrix(doc, "ship_cost", I, J, problems)
    fixed = _vector(doc, "fixed_cost", problems)
    utility = _vector(doc, "utility", problems)
    capacity = _vector(doc, "capacity", problems)

    values = doc.get("values")
    if not isinstance(values, dict):
        problems.append("values: expected an object with P, C, C_rem")
        values = {}
    P = _num(values.get("P"), "values.P", problems)
    C = _num(values.get("C"), "values.C", problems)
    C_rem = _num(values.get("C_rem"), "values.C_rem", problems)

    quality = []
    qdoc = doc.get("quality")
    if not isinstance(qdoc, list):
        problems.append("quality: expected an array")
        qdoc = []
    for n, q in enumerate(qdoc):
        if not isinstance(q, dict):
            problems.append(f"quality[{n}]: expected an object")
            continue
        quality.append(QualityLevel(_num(q.get("beta"), f"quality[{n}].beta", problems),
                                    _num(q.get("h"), f"quality[{n}].h", problems)))

    try:
        spec = scenario_spec_from_document(doc)
    except InstanceError as exc:
        problems.extend(exc.problems)
        spec = None
    if problems:
        raise InstanceError(problems)

    probs, quantities = realize_scenarios(spec, scenario_mode, seed)
    return Instance(
        nodes=ids["nodes"],
        centers=ids["centers"],
        recovery_centers=ids["recovery_centers"],
        travel_cost=travel,
        ship_cost=ship,
        fixed_cost=fixed,
        utility=utility,
        reman_value=P,
        scrap_value=C,
        reman_fixed_cost=C_rem,
        quality=quality,
        capacity=capacity,
        probs=probs,
        quantities=quantities,
    )


def load_instance(path, *, scenario_mode: str = "midpoint", seed: int = 42) -> Instance:
    text = Path(path).read_text(encoding="utf-8")
    return parse_instance(text, scenario_mode=scenario_mode, seed=seed)


def _jnum(x: float):
    if math.isnan(x):
        return None
    return int(x) if float(x).is_integer() and abs(x) < 2**53 else float(x)


def serialize_instance(instance: Instance) -> str:
    """Serialize to the JSON document format with concrete scenario quantities."""
    doc = {
        "nodes": list(instance.nodes),
        "centers": list(instance.centers),
        "recovery_centers": list(instance.recovery_centers),
        "travel_cost": [[_jnum(x) for x in row] for row in instance.travel_cost],
        "ship_cost": [[_jnum(x) for x in row] for row in instance.ship_cost],
        "fixed_cost": [_jnum(x) for x in instance.fixed_cost],
        "utility": [_jnum(x) for x in instance.utility],
        "values": {
            "P": _jnum(instance.reman_value),
            "C": _jnum(instance.scrap_value),
            "C_rem": _jnum(instance.reman_fixed_cost),
        },
        "quality": [{"beta": _jnum(q.beta), "h": _jnum(q.h)} for q in instance.quality],
        "capacity": [_jnum(x) for x in instance.capacity],
        "scenarios": [
            {"prob": _jnum(p), "quantities": [_jnum(x) for x in row]}
            for p, row in zip(instance.probs, instance.quantities)
        ],
    }
    return json.dumps(doc, indent=2)


_DATA = Path(__file__).with_name("data")


def reference_instance(*, scenario_mode: str = "midpoint", seed: int = 42) -> Instance:
    """The bundled six-node reference network (see ``data/reference.json``)."""
    return load_instance(_DATA / "reference.json", scenario_mode=scenario_mode, seed=seed)
