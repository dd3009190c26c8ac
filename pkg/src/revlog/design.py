"""First-stage decisions, incentive prices and risk parameters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .instance import Instance

__all__ = ["Design", "DesignError", "PriceVector", "RiskParams"]


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class RiskParams:
    """Confidence level ``alpha`` in [0, 1) and risk weight ``lam`` >= 0."""

    alpha: float
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.lam >= 0.0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class Design:
    """Open centers, node assignments and the quality cut-off.

    ``assignment[k]`` is the index of the center serving node ``k`` or
    ``None``; holding one index per node makes single assignment structural.
    """

    open_centers: tuple[bool, ...]
    assignment: tuple[Optional[int], ...]
    cutoff: int = 0

    @classmethod
    def empty(cls, instance: Instance) -> "Design":
        return cls((False,) * len(instance.centers), (None,) * len(instance.nodes), 0)

    @classmethod
    def from_matrix(cls, y_center: Sequence[int], y_node_center, cutoff: int) -> "Design":
        """Build from 0/1 vectors ``y_i`` and matrix ``y_ki``."""
        y = np.asarray(y_node_center, dtype=int)
        per_node = y.sum(axis=1)
        if np.any(per_node > 1):
            bad = [int(k) for k in np.flatnonzero(per_node > 1)]
            raise DesignError(f"nodes {bad} are assigned to more than one center")
        assignment = tuple(int(np.argmax(row)) if row.any() else None for row in y)
        return cls(tuple(bool(v) for v in y_center), assignment, int(cutoff))

    @property
    def served(self) -> tuple[int, ...]:
        return tuple(k for k, i in enumerate(self.assignment) if i is not None)

    @property
    def n_open(self) -> int:
        return sum(self.open_centers)

    @property
    def is_empty(self) -> bool:
        return not any(self.open_centers)

    def y_node_center(self) -> np.ndarray:
        y = np.zeros((len(self.assignment), len(self.open_centers)), dtype=int)
        for k, i in enumerate(self.assignment):
            if i is not None:
                y[k, i] = 1
        return y

    def encoding(self) -> tuple:
        return (tuple(int(b) for b in self.open_centers),
                tuple(-1 if i is None else i for i in self.assignment))

    def sort_key(self) -> tuple:
        """Tie-breaking order: fewer open centers, lower cut-off, then encoding."""
        return (self.n_open, self.cutoff, self.encoding())

    def check(self, instance: Instance) -> None:
        """Raise :class:`DesignError` unless ``y_ki <= y_i * p_ki`` holds."""
        if len(self.open_centers) != len(instance.centers):
            raise DesignError("open_centers length does not match the instance")
        if len(self.assignment) != len(instance.nodes):
            raise DesignError("assignment length does not match the instance")
        if not 0 <= self.cutoff < len(instance.quality):
            raise DesignError(f"cut-off index {self.cutoff} out of range")
        arcs = instance.node_center_arcs
        for k, i in enumerate(self.assignment):
            if i is None:
                continue
            if not 0 <= i < len(self.open_centers) or not self.open_centers[i]:
                raise DesignError(f"node {instance.nodes[k]} assigned to a closed center")
            if not arcs[k, i]:
                raise DesignError(
                    f"node {instance.nodes[k]} has no path to center {instance.centers[i]}")


@dataclass(frozen=True, eq=False)
class PriceVector:
    """Per-node incentives; ``nan`` where a price is not used."""

    v_r: np.ndarray
    v_s: np.ndarray

    @classmethod
    def empty(cls, n_nodes: int) -> "PriceVector":
        return cls(np.full(n_nodes, np.nan), np.full(n_nodes, np.nan))

    def __eq__(self, other):
        if not isinstance(other, PriceVector):
            return NotImplemented
        return (np.array_equal(self.v_r, other.v_r, equal_nan=True)
                and np.array_equal(self.v_s, other.v_s, equal_nan=True))

    __hash__ = None
