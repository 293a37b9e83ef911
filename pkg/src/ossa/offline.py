"""Offline optimum for the allocation game.

With the full demand matrix and the hub stock known up front, all supply can
be shipped at the first step, so the problem collapses to covering each
site's net demand (demand beyond its initial stock) from a single budget.
Under the w/c site ordering the optimum fills sites greedily until the budget
runs out at a pivotal site.

Two cost figures are produced: ``cost_relaxed`` charges fractional transport
w*L/c (a valid lower bound on any integral schedule) and ``cost_rounded``
charges full shipments.  Ratio reporting uses the relaxed figure — the
smaller, conservative denominator — with the rounded one carried alongside.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any

import numpy as np

from .engine import ceil_div
from .model import Instance, OssaError, ValidationError


class EnumerationBudgetExceeded(OssaError):
    """The brute-force search space is larger than the configured budget."""


def pivotal_split(net: np.ndarray, supply: float) -> tuple[int, float, np.ndarray]:
    """Greedy prefix allocation pattern over net demands.

    Returns ``(pivot, zeta, fractions)``: sites before the pivot are fully
    served (fraction 1), the pivot serves fraction ``zeta`` of its net
    demand, later sites get nothing.  Supply at or above total net demand
    serves everyone (pivot = last site, zeta = 1).  A zero-net-demand pivot,
    which only arises when supply is zero, counts as fully served (zeta = 1).

    Works for integer or real-valued inputs; used both for the true instance
    and for predicted quantities.
    """
    net = np.asarray(net)
    n = len(net)
    total = net.sum()
    if supply >= total:
        return n - 1, 1.0, np.ones(n, dtype=np.float64)
    prefix = np.cumsum(net)
    pivot = int(np.argmax(prefix >= supply))
    before = prefix[pivot] - net[pivot]
    if net[pivot] <= 0:
        zeta = 1.0
    else:
        zeta = float(max(supply - before, 0) / net[pivot])
    fractions = np.zeros(n, dtype=np.float64)
    fractions[:pivot] = 1.0
    fractions[pivot] = zeta
    return pivot, zeta, fractions


@dataclass(eq=False)
class OfflineSolution:
    """Greedy optimum: net demands, pivotal site, allocation and both costs.

    ``pivotal_index`` is the 0-based position in the sorted site list; it is
    None in the degenerate no-supply case, where nothing is allocated and all
    fractions are zero.
    """

    site_ids: tuple[int, ...]
    net_demand: np.ndarray
    pivotal_index: int | None
    pivotal_value: float
    allocation: np.ndarray
    gamma_star: np.ndarray
    cost_relaxed: float
    cost_rounded: float
    penalty_units: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "site_ids": list(self.site_ids),
            "net_demand": [int(v) for v in self.net_demand],
            "pivotal_index": self.pivotal_index,
            "pivotal_site_id": (
                None if self.pivotal_index is None else self.site_ids[self.pivotal_index]
            ),
            "pivotal_value": self.pivotal_value,
            "allocation": [int(v) for v in self.allocation],
            "gamma_star": [float(v) for v in self.gamma_star],
            "cost_relaxed": self.cost_relaxed,
            "cost_rounded": self.cost_rounded,
            "penalty_units": self.penalty_units,
        }


def solve_offline(instance: Instance) -> OfflineSolution:
    """Greedy characterization of the offline optimum.

    Net demand is (D_i - b_i)_+ since every site starts at its demand bound.
    Zero supply is special-cased to the all-zero allocation with all-zero
    fractions (no pivotal site).
    """
    if not instance.validated:
        raise ValidationError("solve_offline() requires a validated instance")
    n = instance.n
    N = np.maximum(instance.total_demand() - instance.b_array, 0).astype(np.int64)
    total = int(N.sum())
    s = int(instance.s)

    if s == 0 and total > 0:
        pivot: int | None = None
        zeta = 0.0
        gamma = np.zeros(n, dtype=np.float64)
        allocation = np.zeros(n, dtype=np.int64)
    else:
        pivot, zeta, gamma = pivotal_split(N, s)
        allocation = N.copy()
        if s < total:
            prefix = int(N[: pivot + 1].sum())
            allocation[pivot] = s - (prefix - int(N[pivot]))
            allocation[pivot + 1 :] = 0

    penalty_units = total - int(allocation.sum())
    w, c, p = instance.w_array, instance.c_array, instance.p
    cost_relaxed = float(np.sum(w * allocation / c) + p * penalty_units)
    cost_rounded = float(np.sum(w * ceil_div(allocation, c)) + p * penalty_units)
    return OfflineSolution(
        site_ids=instance.site_ids,
        net_demand=N,
        pivotal_index=pivot,
        pivotal_value=zeta,
        allocation=allocation,
        gamma_star=gamma,
        cost_relaxed=cost_relaxed,
        cost_rounded=cost_rounded,
        penalty_units=penalty_units,
    )


def relaxed_lower_bound(instance: Instance) -> float:
    """Fractional-transport optimum cost; a lower bound on any feasible cost."""
    return solve_offline(instance).cost_relaxed


def brute_force_offline(instance: Instance, budget: int = 10**6) -> tuple[np.ndarray, float]:
    """Exact minimizer of the relaxed objective by exhaustive enumeration.

    Enumerates every integer allocation with L_i <= N_i and sum(L) <= s,
    scoring w_i*L_i/c_i + p*(N_i - L_i) in plain Python arithmetic, so it is
    an independent check on the greedy solver.  Only viable for tiny
    instances; raises EnumerationBudgetExceeded when the cross product of
    per-site ranges exceeds ``budget``.
    """
    if not instance.validated:
        raise ValidationError("brute_force_offline() requires a validated instance")
    N = [int(v) for v in np.maximum(instance.total_demand() - instance.b_array, 0)]
    s = int(instance.s)
    w = [float(v) for v in instance.w_array]
    c = [int(v) for v in instance.c_array]
    p = float(instance.p)

    sizes = [min(Ni, s) + 1 for Ni in N]
    space = 1
    for size in sizes:
        space *= size
    if space > budget:
        raise EnumerationBudgetExceeded(f"{space} allocations exceed budget {budget}")

    total_net = sum(N)
    best_cost = float("inf")
    best: tuple[int, ...] | None = None
    for combo in itertools.product(*(range(size) for size in sizes)):
        if sum(combo) > s:
            continue
        cost = sum(wi * li / ci for wi, li, ci in zip(w, combo, c))
        cost += p * (total_net - sum(combo))
        if cost < best_cost:
            best_cost = cost
            best = combo
    assert best is not None  # the all-zero allocation is always feasible
    return np.asarray(best, dtype=np.int64), best_cost
