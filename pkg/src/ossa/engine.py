"""Online event engine.

Each step runs the exact order of events of the model: demand arrives and is
served from on-hand stock (shortfalls charged immediately), the policy then
requests resupply, and the hub grants sites in ascending index order — the
cheapest w/c first — until its stock runs out.  Stock for the next step is
the post-demand remainder plus whatever was granted.

Policies never see the hub's remaining stock; they observe exhaustion only
through a grant smaller than the request, reported via ``notify_grants``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .model import Instance, OssaError, ValidationError


class NegativeRequest(OssaError):
    """A policy asked for a negative number of units."""


class AccountingMismatch(OssaError):
    """Recomputed trace costs disagree with the accumulated totals (engine bug)."""


def ceil_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return -(-a // b)


class StateView:
    """What a policy may observe.

    ``k`` is stock at the start of the step (before demand), ``r`` the
    post-demand remainder, ``L`` cumulative grants through the previous step,
    ``D`` cumulative demand including the current step, and ``past_grants``
    the grant log of earlier steps.  The hub's remaining stock is deliberately
    absent.
    """

    __slots__ = ("t", "k", "r", "L", "D", "b", "c", "w", "p", "past_grants")

    def __init__(self, b: np.ndarray, c: np.ndarray, w: np.ndarray, p: float):
        self.b = b
        self.c = c
        self.w = w
        self.p = p
        self.t = 0


class Policy(Protocol):
    def requests(self, view: StateView, demands: np.ndarray) -> np.ndarray:
        """Units requested per site for this step (non-negative integers)."""
        ...

    def notify_grants(self, grants: np.ndarray) -> None:
        """Units actually received per site, possibly truncated by the hub."""
        ...


@dataclass(eq=False)
class Trace:
    """Complete record of one simulation run.

    Per-step arrays have shape (horizon, n) and pair column i with
    ``site_ids[i]``.
    """

    site_ids: tuple[int, ...]
    demand: np.ndarray
    penalty_units: np.ndarray
    request: np.ndarray
    grant: np.ndarray
    stock_after: np.ndarray
    transport_by_site: np.ndarray
    penalty_by_site: np.ndarray
    terminal_stock: np.ndarray
    s_initial: int
    s_end: int
    exhausted: bool
    p: float
    w: np.ndarray
    c: np.ndarray
    b: np.ndarray

    @property
    def n(self) -> int:
        return len(self.site_ids)

    @property
    def horizon(self) -> int:
        return int(self.demand.shape[0])

    @property
    def transport(self) -> float:
        return float(self.transport_by_site.sum())

    @property
    def penalty(self) -> float:
        return float(self.penalty_by_site.sum())

    @property
    def total(self) -> float:
        return float(np.sum(self.transport_by_site + self.penalty_by_site))

    @property
    def grants_by_site(self) -> np.ndarray:
        """Total units granted per site (the L_i of the run)."""
        return self.grant.sum(axis=0)

    @property
    def demand_by_site(self) -> np.ndarray:
        return self.demand.sum(axis=0)

    @property
    def penalty_units_by_site(self) -> np.ndarray:
        return self.penalty_units.sum(axis=0)

    def identical_to(self, other: "Trace") -> bool:
        """Bit-exact equality of the full event log and all totals."""
        return (
            self.site_ids == other.site_ids
            and self.s_initial == other.s_initial
            and self.s_end == other.s_end
            and self.exhausted == other.exhausted
            and np.array_equal(self.demand, other.demand)
            and np.array_equal(self.penalty_units, other.penalty_units)
            and np.array_equal(self.request, other.request)
            and np.array_equal(self.grant, other.grant)
            and np.array_equal(self.stock_after, other.stock_after)
            and np.array_equal(self.transport_by_site, other.transport_by_site)
            and np.array_equal(self.penalty_by_site, other.penalty_by_site)
        )


def run(instance: Instance, policy: Policy) -> Trace:
    """Simulate ``policy`` on ``instance`` and return the full trace.

    The instance must have passed ``validate``; the policy must be fresh
    (single-use).  Deterministic given the instance and the policy's own
    random state.
    """
    if not instance.validated:
        raise ValidationError("run() requires a validated instance")
    n, T = instance.n, instance.horizon
    b, c, w, p = instance.b_array, instance.c_array, instance.w_array, instance.p
    demand = instance.demand

    k = b.copy()
    k.flags.writeable = False
    L = np.zeros(n, dtype=np.int64)
    D = np.zeros(n, dtype=np.int64)
    s_rem = int(instance.s)
    exhausted = False

    demand_log = np.zeros((T, n), dtype=np.int64)
    penalty_log = np.zeros((T, n), dtype=np.int64)
    request_log = np.zeros((T, n), dtype=np.int64)
    grant_log = np.zeros((T, n), dtype=np.int64)
    stock_log = np.zeros((T, n), dtype=np.int64)
    shipments = np.zeros(n, dtype=np.int64)

    view = StateView(b, c, w, p)
    L_view = L.view()
    L_view.flags.writeable = False
    D_view = D.view()
    D_view.flags.writeable = False
    view.L = L_view
    view.D = D_view

    for t in range(T):
        d = demand[:, t]
        unmet = np.maximum(d - k, 0)
        r = np.maximum(k - d, 0)
        r.flags.writeable = False
        D += d

        view.t = t + 1
        view.k = k
        view.r = r
        past = grant_log[:t]
        past.flags.writeable = False
        view.past_grants = past

        req = np.asarray(policy.requests(view, d))
        if req.shape != (n,):
            raise ValidationError(
                f"policy returned requests of shape {req.shape}, expected ({n},)"
            )
        if not np.issubdtype(req.dtype, np.integer):
            rounded = np.floor(req)
            if not np.all(rounded == req):
                raise ValidationError("policy returned non-integer request units")
            req = rounded
        req = req.astype(np.int64, copy=False)
        if np.any(req < 0):
            raise NegativeRequest(f"negative request at step {t + 1}")

        # Ascending-index truncation: site i receives whatever stock is left
        # after sites 1..i-1 were served this step.
        ahead = np.cumsum(req) - req
        grant = np.minimum(req, np.maximum(s_rem - ahead, 0))
        if np.any(grant < req):
            exhausted = True
        s_rem -= int(grant.sum())
        L += grant
        shipments += ceil_div(grant, c)

        policy.notify_grants(grant)
        k = r + grant
        k.flags.writeable = False

        demand_log[t] = d
        penalty_log[t] = unmet
        request_log[t] = req
        grant_log[t] = grant
        stock_log[t] = k

    penalty_units = penalty_log.sum(axis=0) if T else np.zeros(n, dtype=np.int64)
    transport_by_site = w * shipments
    penalty_by_site = p * penalty_units
    return Trace(
        site_ids=instance.site_ids,
        demand=demand_log,
        penalty_units=penalty_log,
        request=request_log,
        grant=grant_log,
        stock_after=stock_log,
        transport_by_site=transport_by_site,
        penalty_by_site=penalty_by_site,
        terminal_stock=np.asarray(k),
        s_initial=int(instance.s),
        s_end=s_rem,
        exhausted=exhausted,
        p=p,
        w=w,
        c=c,
        b=b,
    )


def cost_of(trace: Trace) -> tuple[float, float, float]:
    """Recompute (transport, penalty, total) from the raw event log.

    Cross-checks the recomputation against the trace's accumulated totals and
    the hub stock balance; any disagreement raises AccountingMismatch, which
    signals an engine bug rather than bad input.
    """
    shipments = ceil_div(trace.grant, trace.c).sum(axis=0) if trace.horizon else np.zeros(trace.n, dtype=np.int64)
    transport_by_site = trace.w * shipments
    penalty_by_site = trace.p * trace.penalty_units_by_site
    transport = float(transport_by_site.sum())
    penalty = float(penalty_by_site.sum())
    total = float(np.sum(transport_by_site + penalty_by_site))

    if not np.allclose(transport_by_site, trace.transport_by_site, rtol=0, atol=1e-9):
        raise AccountingMismatch("per-site transport disagrees with the event log")
    if not np.allclose(penalty_by_site, trace.penalty_by_site, rtol=0, atol=1e-9):
        raise AccountingMismatch("per-site penalty disagrees with the event log")
    if trace.s_end + int(trace.grant.sum()) != trace.s_initial:
        raise AccountingMismatch("hub stock does not balance against total grants")
    if abs(total - trace.total) > 1e-9:
        raise AccountingMismatch("total cost disagrees with the event log")
    return transport, penalty, total


def write_trace_csv(trace: Trace, path: str | Path) -> None:
    """Per-step event log: one row per (t, site)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "site_id", "demand", "penalty_units", "request", "grant", "stock_after"])
        for t in range(trace.horizon):
            for i, sid in enumerate(trace.site_ids):
                writer.writerow([
                    t + 1,
                    sid,
                    int(trace.demand[t, i]),
                    int(trace.penalty_units[t, i]),
                    int(trace.request[t, i]),
                    int(trace.grant[t, i]),
                    int(trace.stock_after[t, i]),
                ])


def write_trace_summary_csv(trace: Trace, path: str | Path) -> None:
    """Per-site cost summary."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site_id", "transport", "penalty"])
        for i, sid in enumerate(trace.site_ids):
            writer.writerow([sid, repr(float(trace.transport_by_site[i])), repr(float(trace.penalty_by_site[i]))])
