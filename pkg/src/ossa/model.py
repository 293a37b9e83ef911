"""Domain model for online shared-supply allocation (OSSA) instances.

An instance couples a central hub holding ``s`` supply units with ``n`` local
sites.  Site ``i`` ships in loads of up to ``c_i`` units at a fixed charge
``w_i`` per shipment, faces at most ``b_i`` units of demand per time step, and
starts with ``b_i`` units on hand.  Demand that cannot be served from on-hand
stock is lost and charged ``p`` per unit.

Instance files are JSON documents::

    {"penalty": 1.0, "supply": 3,
     "sites": [{"id": 1, "w": 0.1, "c": 1, "b": 1}, {"id": 2, "w": 0.5, "c": 1, "b": 1}],
     "demand": [[1, 1, 1], [1, 1, 0]]}

``demand[i][t]`` rows follow the order of ``sites`` as written; ``validate``
re-sorts sites by fractional transport cost w/c and reindexes the matrix to
match.  Demand may instead be supplied as a CSV with header
``t,site_id,demand`` (1-based steps, missing cells are zero) and merged via
``demand_from_csv``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


class OssaError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(OssaError):
    """An instance or parameter violates a model invariant."""


class CapacityZero(ValidationError):
    """A site's shipment capacity is below one unit."""


class DemandBoundViolated(ValidationError):
    """A demand entry exceeds the site's per-step bound."""


class PenaltyDominated(ValidationError):
    """A site's shipment cost exceeds the penalty value of a full load."""


@dataclass(frozen=True)
class SiteSpec:
    """One site: fixed charge per shipment, units per shipment, per-step demand bound."""

    site_id: int
    w: float
    c: int
    b: int

    @property
    def unit_cost(self) -> float:
        """Transport cost per unit when shipping full loads."""
        return self.w / self.c


@dataclass(frozen=True)
class GammaVector:
    """Per-site replenishment fractions, each in [0, 1]."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        for i, g in enumerate(self.values):
            if not 0.0 <= g <= 1.0:
                raise ValidationError(f"gamma[{i}] = {g} is outside [0, 1]")

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @classmethod
    def constant(cls, value: float, n: int) -> "GammaVector":
        return cls((float(value),) * n)

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "GammaVector":
        return cls(tuple(float(v) for v in values))


@dataclass(eq=False)
class Instance:
    """A full problem instance.  Treat as immutable once validated.

    ``demand`` has shape (n, horizon); row i pairs with ``sites[i]``.
    """

    sites: tuple[SiteSpec, ...]
    p: float
    s: int
    demand: np.ndarray
    validated: bool = False

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def horizon(self) -> int:
        return int(self.demand.shape[1])

    @property
    def site_ids(self) -> tuple[int, ...]:
        return tuple(site.site_id for site in self.sites)

    @cached_property
    def w_array(self) -> np.ndarray:
        arr = np.array([site.w for site in self.sites], dtype=np.float64)
        arr.flags.writeable = False
        return arr

    @cached_property
    def c_array(self) -> np.ndarray:
        arr = np.array([site.c for site in self.sites], dtype=np.int64)
        arr.flags.writeable = False
        return arr

    @cached_property
    def b_array(self) -> np.ndarray:
        arr = np.array([site.b for site in self.sites], dtype=np.int64)
        arr.flags.writeable = False
        return arr

    def total_demand(self) -> np.ndarray:
        """Cumulative demand per site over the whole horizon."""
        if self.horizon == 0:
            return np.zeros(self.n, dtype=np.int64)
        return self.demand.sum(axis=1)

    def replace_supply(self, s: int) -> "Instance":
        """Same sites and demand with a different hub stock (not yet validated)."""
        return Instance(self.sites, self.p, int(s), np.asarray(self.demand), validated=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.sites == other.sites
            and self.p == other.p
            and self.s == other.s
            and self.demand.shape == other.demand.shape
            and bool(np.array_equal(self.demand, other.demand))
        )

    @classmethod
    def from_dict(cls, raw: dict[str, Any], demand: np.ndarray | None = None) -> "Instance":
        sites = tuple(
            SiteSpec(int(d["id"]), float(d["w"]), int(d["c"]), int(d["b"]))
            for d in raw["sites"]
        )
        if demand is None:
            demand = np.asarray(raw["demand"])
            if demand.ndim == 1 and demand.size == 0:
                demand = demand.reshape(len(sites), 0)
        return cls(sites, float(raw["penalty"]), int(raw["supply"]), demand)

    def to_dict(self) -> dict[str, Any]:
        return {
            "penalty": self.p,
            "supply": self.s,
            "sites": [
                {"id": site.site_id, "w": site.w, "c": site.c, "b": site.b}
                for site in self.sites
            ],
            "demand": self.demand.tolist(),
        }


def validate(instance: Instance | dict[str, Any]) -> Instance:
    """Check all model invariants and return a normalized instance.

    Sites are re-sorted by fractional transport cost w/c (ties broken by
    ascending site_id) and the demand matrix is reindexed to match.  The
    returned instance carries a read-only demand matrix and is flagged
    ``validated``.  Idempotent: validating an already-validated instance
    returns an equal one.

    Raises CapacityZero, DemandBoundViolated or PenaltyDominated for the
    named contract violations, ValidationError for any other defect.
    """
    if isinstance(instance, dict):
        instance = Instance.from_dict(instance)

    demand = np.asarray(instance.demand)
    if demand.ndim != 2:
        raise ValidationError(f"demand must be a 2-D matrix, got shape {demand.shape}")
    if not np.issubdtype(demand.dtype, np.integer):
        if demand.size and not np.all(np.floor(demand) == demand):
            raise ValidationError("demand entries must be integers")
        demand = demand.astype(np.int64)
    else:
        demand = demand.astype(np.int64, copy=False)
    n = len(instance.sites)
    if n == 0:
        raise ValidationError("instance has no sites")
    if demand.shape[0] != n:
        raise ValidationError(
            f"demand has {demand.shape[0]} rows but the instance has {n} sites"
        )
    if instance.p < 0:
        raise ValidationError(f"penalty must be non-negative, got {instance.p}")
    if instance.s < 0:
        raise ValidationError(f"supply must be non-negative, got {instance.s}")

    seen: set[int] = set()
    for site in instance.sites:
        if site.site_id in seen:
            raise ValidationError(f"duplicate site_id {site.site_id}")
        seen.add(site.site_id)
        if site.c < 1:
            raise CapacityZero(f"site {site.site_id}: capacity c = {site.c} < 1")
        if site.b < 1:
            raise ValidationError(f"site {site.site_id}: demand bound b = {site.b} < 1")
        if site.w < 0:
            raise ValidationError(f"site {site.site_id}: shipment cost w = {site.w} < 0")
        if site.w > instance.p * site.c:
            raise PenaltyDominated(
                f"site {site.site_id}: w = {site.w} exceeds p*c = {instance.p * site.c}"
            )

    if np.any(demand < 0):
        i, t = np.argwhere(demand < 0)[0]
        raise ValidationError(
            f"site {instance.sites[i].site_id}: negative demand at step {t + 1}"
        )
    for i, site in enumerate(instance.sites):
        over = np.nonzero(demand[i] > site.b)[0]
        if over.size:
            t = int(over[0])
            raise DemandBoundViolated(
                f"site {site.site_id}: demand {int(demand[i, t])} at step {t + 1} "
                f"exceeds bound b = {site.b}"
            )

    order = sorted(range(n), key=lambda i: (instance.sites[i].unit_cost, instance.sites[i].site_id))
    sites = tuple(instance.sites[i] for i in order)
    demand = np.ascontiguousarray(demand[order])
    demand.flags.writeable = False
    return Instance(sites, float(instance.p), int(instance.s), demand, validated=True)


def demand_from_csv(source: str | Path, site_ids: Sequence[int], horizon: int | None = None) -> np.ndarray:
    """Build a demand matrix from CSV rows ``t,site_id,demand``.

    Steps are 1-based; absent (t, site) pairs contribute zero demand.  The
    horizon defaults to the largest step seen.
    """
    index = {int(sid): i for i, sid in enumerate(site_ids)}
    entries: list[tuple[int, int, int]] = []
    max_t = 0
    with open(source, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            t = int(row["t"])
            sid = int(row["site_id"])
            d = int(row["demand"])
            if t < 1:
                raise ValidationError(f"demand CSV: step t = {t} is not 1-based")
            if sid not in index:
                raise ValidationError(f"demand CSV: unknown site_id {sid}")
            if d < 0:
                raise ValidationError(f"demand CSV: negative demand for site {sid} at t = {t}")
            entries.append((t, index[sid], d))
            max_t = max(max_t, t)
    T = max_t if horizon is None else int(horizon)
    if T < max_t:
        raise ValidationError(f"horizon {T} is smaller than the last demand step {max_t}")
    demand = np.zeros((len(index), T), dtype=np.int64)
    for t, i, d in entries:
        demand[i, t - 1] += d
    return demand


def load_instance(path: str | Path, demand_csv: str | Path | None = None) -> Instance:
    """Load and validate an instance JSON file, optionally merging CSV demand."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    demand = None
    if demand_csv is not None:
        site_ids = [int(d["id"]) for d in raw["sites"]]
        demand = demand_from_csv(demand_csv, site_ids)
    elif "demand" not in raw:
        raise ValidationError(f"{path}: no demand matrix and no demand CSV given")
    return validate(Instance.from_dict(raw, demand=demand))


def save_instance(instance: Instance, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance.to_dict(), fh)
        fh.write("\n")
