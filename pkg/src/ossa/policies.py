"""Replenishment policies.

All policies implement the engine's ``Policy`` contract: given the per-step
state view and the fresh demands, return the units requested per site, then
learn via ``notify_grants`` how much the hub actually sent.  Requests are in
whole shipments of ``c_i`` units so that each fixed charge buys a full load.

Policies are single-run objects; construct a fresh one per simulation.  Those
that need cumulative grant/demand counters keep their own mirrors and, in
debug mode, assert agreement with the engine's view to catch interface drift.
"""

from __future__ import annotations

import numpy as np

from .engine import StateView, ceil_div
from .model import GammaVector, Instance, OssaError


class RhoOutOfRange(OssaError):
    """A supply-fraction parameter is outside its legal range."""


def refill_units(b: np.ndarray, r: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Units needed to restore stock to at least b, rounded up to full shipments."""
    shipments = np.maximum(ceil_div(b - r, c), 0)
    return c * shipments


def threshold_fractions(instance: Instance, coef: float) -> np.ndarray:
    """Per-site fraction cap min{1, coef * p * c_i / w_i}; 1 where shipping is free.

    Shared by the advice-free default and the prediction-band construction so
    that equal coefficients give bit-identical fractions.
    """
    w = instance.w_array
    out = np.ones(instance.n, dtype=np.float64)
    nz = w > 0
    out[nz] = np.minimum(1.0, coef * instance.p * instance.c_array[nz] / w[nz])
    return out


def default_gamma(instance: Instance) -> GammaVector:
    """Advice-free replenishment fractions min{1, p*c_i/(3*w_i)}."""
    return GammaVector.from_array(threshold_fractions(instance, 1.0 / 3.0))


class GpaPolicy:
    """Threshold-proportional refill.

    A site is topped back up to its demand bound whenever its remainder fell
    below the bound AND cumulative grants through the previous step are still
    within gamma_i times cumulative demand including the current step.
    """

    def __init__(self, gamma: GammaVector | np.ndarray | list[float] | tuple[float, ...]):
        if not isinstance(gamma, GammaVector):
            gamma = GammaVector.from_array(gamma)
        self.gamma = gamma
        self._g = gamma.as_array()
        self._L: np.ndarray | None = None
        self._D: np.ndarray | None = None
        self._view: StateView | None = None

    def requests(self, view: StateView, demands: np.ndarray) -> np.ndarray:
        if self._L is None:
            n = len(view.b)
            if len(self._g) != n:
                raise ValueError(f"gamma has {len(self._g)} entries for {n} sites")
            self._L = np.zeros(n, dtype=np.int64)
            self._D = np.zeros(n, dtype=np.int64)
        self._D += demands
        self._view = view
        if __debug__:
            assert np.array_equal(self._D, view.D), "demand mirror drifted from engine"
        eligible = (view.r < view.b) & (self._L <= self._g * self._D)
        return np.where(eligible, refill_units(view.b, view.r, view.c), 0)

    def notify_grants(self, grants: np.ndarray) -> None:
        self._L += grants
        if __debug__ and self._view is not None:
            assert np.array_equal(self._L, self._view.L), "grant mirror drifted from engine"


class AlwaysFillPolicy:
    """Restore every site to its demand bound whenever stock dips below it."""

    def requests(self, view: StateView, demands: np.ndarray) -> np.ndarray:
        return np.where(view.r < view.b, refill_units(view.b, view.r, view.c), 0)

    def notify_grants(self, grants: np.ndarray) -> None:
        pass


class RhoGreedyPolicy:
    """Keep cumulative grants within rho times cumulative demand.

    Same eligibility shape as the threshold-proportional rule with a uniform
    fraction and no low-stock trigger; rho is fed in out-of-band (typically
    supply / total demand, which an online policy could not know).
    """

    def __init__(self, rho: float):
        if rho < 0:
            raise RhoOutOfRange(f"rho = {rho} < 0")
        self.rho = float(rho)
        self._L: np.ndarray | None = None
        self._D: np.ndarray | None = None
        self._view: StateView | None = None

    def requests(self, view: StateView, demands: np.ndarray) -> np.ndarray:
        if self._L is None:
            self._L = np.zeros(len(view.b), dtype=np.int64)
            self._D = np.zeros(len(view.b), dtype=np.int64)
        self._D += demands
        self._view = view
        eligible = self._L <= self.rho * self._D
        return np.where(eligible, refill_units(view.b, view.r, view.c), 0)

    def notify_grants(self, grants: np.ndarray) -> None:
        self._L += grants
        if __debug__ and self._view is not None:
            assert np.array_equal(self._L, self._view.L)


class RhoCoinFlipPolicy:
    """Refill each low site independently with probability rho.

    One Bernoulli draw per site per step, in site order within the step, so a
    fixed seed reproduces the trace exactly.
    """

    def __init__(self, rho: float, rng: np.random.Generator | int):
        if not 0.0 <= rho <= 1.0:
            raise RhoOutOfRange(f"rho = {rho} outside [0, 1]")
        self.rho = float(rho)
        self._rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    def requests(self, view: StateView, demands: np.ndarray) -> np.ndarray:
        heads = self._rng.random(len(view.b)) < self.rho
        eligible = heads & (view.r < view.b)
        return np.where(eligible, refill_units(view.b, view.r, view.c), 0)

    def notify_grants(self, grants: np.ndarray) -> None:
        pass


class BacklogPolicy:
    """Refill once the penalty value of unmet demand since the last successful
    resupply reaches the site's shipment cost.

    The accumulator is in cost units (p per unmet unit) and the comparison is
    >=, so free shipping degenerates to refill-on-shortfall.
    """

    def __init__(self) -> None:
        self._unmet: np.ndarray | None = None

    def requests(self, view: StateView, demands: np.ndarray) -> np.ndarray:
        if self._unmet is None:
            self._unmet = np.zeros(len(view.b), dtype=np.int64)
        self._unmet += np.maximum(demands - view.k, 0)
        eligible = (view.p * self._unmet >= view.w) & (view.r < view.b)
        return np.where(eligible, refill_units(view.b, view.r, view.c), 0)

    def notify_grants(self, grants: np.ndarray) -> None:
        if self._unmet is not None:
            self._unmet[grants > 0] = 0


class NeverRequestPolicy:
    """Requests nothing; every site lives off its initial stock."""

    def requests(self, view: StateView, demands: np.ndarray) -> np.ndarray:
        return np.zeros(len(view.b), dtype=np.int64)

    def notify_grants(self, grants: np.ndarray) -> None:
        pass
