"""Forecast-guided replenishment fractions.

Predictions of the hub stock and of each site's total demand are turned into
per-site fractions that mimic the offline optimum's prefix pattern, clipped
into a band [lower_i, upper_i] controlled by a distrust level ``lam`` in
(0, 1/3].  Small ``lam`` trusts the forecast (narrow optimistic band); at
``lam = 1/3`` the band collapses onto the advice-free default fractions and
the forecast is ignored entirely.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .model import GammaVector, Instance, OssaError, ValidationError
from .offline import pivotal_split
from .policies import GpaPolicy, threshold_fractions

ADVICE_FREE_LAMBDA = 1.0 / 3.0


class LambdaOutOfRange(OssaError):
    """The distrust parameter is outside (0, 1/3]."""


def tau_of_lambda(lam: float) -> float:
    """Upper-band aggressiveness implied by distrust level ``lam``.

    tau = (sqrt(1 + lam) - sqrt(lam))**2, which satisfies
    (1 - tau)**2 / (4 * tau) = lam and lam <= tau < 1 on (0, 1/3].
    """
    if not 0.0 < lam <= ADVICE_FREE_LAMBDA:
        raise LambdaOutOfRange(f"lambda = {lam} outside (0, 1/3]")
    if lam == ADVICE_FREE_LAMBDA:
        # Float-exact so the band collapse onto the advice-free fractions is bit-exact.
        return ADVICE_FREE_LAMBDA
    return (math.sqrt(1.0 + lam) - math.sqrt(lam)) ** 2


@dataclass(eq=False)
class Predictions:
    """Forecast (s_hat, d_hat) with its realized absolute error eta.

    ``d_hat[i]`` pairs with ``instance.sites[i]`` in validated (sorted)
    order.  ``eta`` is |s - s_hat| + sum_i |D_i - d_hat_i| for the instance
    the predictions were built against.
    """

    s_hat: float
    d_hat: np.ndarray
    eta: float

    def recompute_eta(self, instance: Instance) -> float:
        D = instance.total_demand()
        return float(abs(instance.s - self.s_hat) + np.abs(D - self.d_hat).sum())

    @classmethod
    def for_instance(cls, instance: Instance, s_hat: float, d_hat: np.ndarray) -> "Predictions":
        d_hat = np.asarray(d_hat, dtype=np.float64)
        if d_hat.shape != (instance.n,):
            raise ValidationError(
                f"d_hat has shape {d_hat.shape}, expected ({instance.n},)"
            )
        if s_hat < 0 or np.any(d_hat < 0):
            raise ValidationError("predictions must be non-negative")
        pred = cls(float(s_hat), d_hat, 0.0)
        pred.eta = pred.recompute_eta(instance)
        return pred

    @classmethod
    def perfect(cls, instance: Instance) -> "Predictions":
        return cls(float(instance.s), instance.total_demand().astype(np.float64), 0.0)

    def to_dict(self) -> dict[str, Any]:
        return {"s_hat": self.s_hat, "d_hat": [float(v) for v in self.d_hat]}


def load_predictions(path: str | Path, instance: Instance) -> Predictions:
    """Read a ``{"s_hat": ..., "d_hat": [...]}`` file; eta is computed here."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return Predictions.for_instance(instance, float(raw["s_hat"]), np.asarray(raw["d_hat"], dtype=np.float64))


def predicted_fractions(instance: Instance, predictions: Predictions) -> tuple[int, float, np.ndarray]:
    """Prefix pattern (pivot, zeta, fractions) implied by the forecast alone.

    Net demands use the same (x - b)_+ map as the true instance.  This is the
    pattern before any band clipping.
    """
    net = np.maximum(predictions.d_hat - instance.b_array, 0.0)
    return pivotal_split(net, predictions.s_hat)


def gamma_from_predictions(instance: Instance, predictions: Predictions, lam: float) -> GammaVector:
    """Band-clipped fractions steering refills toward the forecast's pattern.

    Sites before the predicted pivot run at the upper band, sites after it at
    the lower band, and the pivot itself at the predicted fraction clipped
    into [lower, upper].
    """
    tau = tau_of_lambda(lam)
    lower = threshold_fractions(instance, lam)
    upper = threshold_fractions(instance, tau)
    pivot, zeta_hat, _ = predicted_fractions(instance, predictions)
    gamma = lower.copy()
    gamma[:pivot] = upper[:pivot]
    gamma[pivot] = min(upper[pivot], max(zeta_hat, lower[pivot]))
    return GammaVector.from_array(gamma)


def la_gpa(instance: Instance, predictions: Predictions, lam: float) -> GpaPolicy:
    """Threshold-proportional policy driven by forecast-constructed fractions."""
    return GpaPolicy(gamma_from_predictions(instance, predictions, lam))


def make_predictions(
    instance: Instance, target_eta: float, rng: np.random.Generator | int
) -> Predictions:
    """Perturb the true (s, D) to hit a requested error level.

    Signed symmetric multiplicative noise is drawn for the supply and every
    site total, then rescaled (with clamping at zero) so the realized error
    lands within 5% of ``target_eta``.  A zero target returns the exact
    values.  Deterministic given the rng seed.
    """
    if not math.isfinite(target_eta) or target_eta < 0:
        raise ValidationError(f"target_eta = {target_eta} must be finite and >= 0")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    D = instance.total_demand().astype(np.float64)
    truth = np.concatenate(([float(instance.s)], D))
    if target_eta == 0:
        return Predictions.for_instance(instance, float(instance.s), D)

    base = np.maximum(truth, 1.0)
    noise = rng.uniform(-1.0, 1.0, len(truth))
    while not np.any(noise > 0):
        noise = rng.uniform(-1.0, 1.0, len(truth))
    delta = base * noise

    def realized(scale: float) -> float:
        guess = np.maximum(truth + scale * delta, 0.0)
        return float(np.abs(truth - guess).sum())

    hi = 1.0
    while realized(hi) < target_eta:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        value = realized(mid)
        if abs(value - target_eta) <= 0.02 * target_eta:
            lo = hi = mid
            break
        if value < target_eta:
            lo = mid
        else:
            hi = mid
    scale = 0.5 * (lo + hi)
    guess = np.maximum(truth + scale * delta, 0.0)
    return Predictions.for_instance(instance, float(guess[0]), guess[1:])
