"""Logit attraction of returns and the remanufacture/scrap demand split."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .design import Design, PriceVector
from .instance import Instance

__all__ = ["DemandTable", "attraction_fraction", "demand_split", "demand_table"]


def attraction_fraction(v, d, u):
    """Share of a node's customers choosing the OEM center.

    ``exp(v - d) / (exp(v - d) + u)``, evaluated as ``expit(v - d - log u)``
    so that large incentive gaps saturate instead of overflowing.
    """
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise ValueError("competitor utility u must be > 0")
    out = expit(np.asarray(v, dtype=float) - np.asarray(d, dtype=float) - np.log(u))
    return float(out) if out.ndim == 0 else out


def demand_split(R, beta, v_r, v_s, d, u, path_active=True) -> tuple[float, float]:
    """Quantities attracted for remanufacturing and for scrapping.

    A price may be ``None`` when its share of the returns is empty
    (``beta == 0`` for ``v_r``, ``beta == 1`` for ``v_s``).
    """
    if R < 0:
        raise ValueError("return quantity must be >= 0")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if not path_active:
        return 0.0, 0.0
    d_r = R * beta * attraction_fraction(v_r, d, u) if beta > 0 else 0.0
    d_s = R * (1.0 - beta) * attraction_fraction(v_s, d, u) if beta < 1 else 0.0
    return d_r, d_s


@dataclass(frozen=True, eq=False)
class DemandTable:
    """Attraction fractions ``(K, I)`` and quantities ``(S, K, I)``."""

    x_r: np.ndarray
    x_s: np.ndarray
    reman: np.ndarray
    scrap: np.ndarray

    def collected(self) -> np.ndarray:
        """Remanufacturing quantity arriving at each center, ``(S, I)``."""
        return self.reman.sum(axis=1)


def demand_table(instance: Instance, design: Design, prices: PriceVector,
                 scenario: Optional[int] = None) -> DemandTable:
    """Demand on every active path, for all scenarios or just ``scenario``."""
    design.check(instance)
    K, I = len(instance.nodes), len(instance.centers)
    R = instance.quantities if scenario is None else instance.quantities[[scenario]]
    beta = instance.quality[design.cutoff].beta
    x_r = np.zeros((K, I))
    x_s = np.zeros((K, I))
    reman = np.zeros((R.shape[0], K, I))
    scrap = np.zeros((R.shape[0], K, I))
    for k, i in enumerate(design.assignment):
        if i is None:
            continue
        d, u = instance.travel_cost[k, i], instance.utility[k]
        if beta > 0:
            x_r[k, i] = attraction_fraction(prices.v_r[k], d, u)
        if beta < 1:
            x_s[k, i] = attraction_fraction(prices.v_s[k], d, u)
        reman[:, k, i] = R[:, k] * beta * x_r[k, i]
        scrap[:, k, i] = R[:, k] * (1.0 - beta) * x_s[k, i]
    return DemandTable(x_r, x_s, reman, scrap)
