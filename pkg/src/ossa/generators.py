"""Instance generators.

Three families:

* a synthetic benchmark — Beta-distributed shipment costs, Poisson demand
  bounds, truncated-Poisson demand, with the hub stock swept as a fraction
  ``rho`` of total net demand;
* hand-built hard instances whose optimal costs have closed forms, used as
  analytic oracles and for policy stress tests;
* ingestion of pre-aggregated ride-pickup CSVs into an instance family, with
  shipment costs taken from planar distances to a demand-weighted depot.

All generators return validated instances and are deterministic given their
seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .advice import ADVICE_FREE_LAMBDA, LambdaOutOfRange, Predictions
from .model import Instance, OssaError, SiteSpec, ValidationError, validate

DEFAULT_RHO_GRID: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(1, 13))


class OddN(OssaError):
    """The half-surge construction needs an even number of sites."""


class SupplyTooSmall(OssaError):
    """The two-site construction needs at least 2 units of supply."""


class UnknownCase(OssaError):
    """Unrecognized case identifier for the indistinguishable-pair construction."""


class MissingGeo(OssaError):
    """A demand row references a location with no coordinates."""


class EmptyInput(OssaError):
    """An ingestion file contains no data rows."""


class NonPositiveDates(OssaError):
    """Ingestion produced no time steps."""


def supply_for_rho(demand: np.ndarray, bounds: np.ndarray, rho: float) -> int:
    """Hub stock floor(rho * (total demand - total initial stock)), floored at 0."""
    slack = int(demand.sum()) - int(bounds.sum())
    return max(0, int(math.floor(rho * slack)))


@dataclass(frozen=True)
class SyntheticConfig:
    """Synthetic benchmark knobs; defaults mirror the full-scale protocol."""

    n: int = 50
    horizon: int = 10_000
    capacity: int = 10
    weight_alpha: float = 1.0
    weight_beta: float = 1.0
    demand_bound_mean: float = 10.0
    rho_grid: tuple[float, ...] = DEFAULT_RHO_GRID
    seed: int = 0


def gen_synthetic(config: SyntheticConfig) -> dict[float, Instance]:
    """One instance per rho, sharing a single draw of sites and demand.

    w_i ~ Beta(alpha, beta), b_i ~ Poisson(mean) redrawn while zero, demand
    d_i^t = min(b_i, Poisson(b_i)), p = 1e-6 + max_i w_i/c_i, and
    s = floor(rho * (sum D - sum b)) per grid point.
    """
    if any(rho <= 0 for rho in config.rho_grid):
        raise ValidationError("rho grid values must be positive")
    rng = np.random.default_rng(config.seed)
    n, T, c = config.n, config.horizon, config.capacity
    w = rng.beta(config.weight_alpha, config.weight_beta, n)
    b = rng.poisson(config.demand_bound_mean, n)
    while np.any(b == 0):
        b[b == 0] = rng.poisson(config.demand_bound_mean, int(np.sum(b == 0)))
    demand = np.minimum(b[:, None], rng.poisson(b[:, None].astype(np.float64), (n, T)))
    p = 1e-6 + float(np.max(w / c))
    sites = tuple(
        SiteSpec(i + 1, float(w[i]), c, int(b[i])) for i in range(n)
    )
    family: dict[float, Instance] = {}
    for rho in config.rho_grid:
        s = supply_for_rho(demand, b, rho)
        family[rho] = validate(Instance(sites, p, s, demand.copy()))
    return family


@dataclass(eq=False)
class HalfSurgeInstance:
    """Surge-on-a-random-half construction: all sites drained at step 1, then
    a uniformly random half surges again at step 2 while the hub holds only
    enough for half the sites."""

    instance: Instance
    surge_sites: tuple[int, ...]
    shipment_cost: float
    analytic_opt_cost: float


def gen_lower1(
    n: int, gamma_units: int, epsilon: float, k_const: float, seed: int = 0
) -> HalfSurgeInstance:
    """n even sites with b = c = gamma_units, w = p*gamma*eps/(2*(k+1)), s = n*gamma/2.

    Step-1 demand drains every site; step-2 demand of gamma_units hits a
    uniformly random half-subset.  The offline optimum ships one load to each
    surging site, costing w * n/2.
    """
    if n % 2 != 0:
        raise OddN(f"n = {n} must be even")
    if n < 2 or gamma_units < 1:
        raise ValidationError("need n >= 2 and gamma_units >= 1")
    if epsilon <= 0 or k_const < 0:
        raise ValidationError("need epsilon > 0 and k_const >= 0")
    p = 1.0
    g = int(gamma_units)
    w = p * g * epsilon / (2.0 * (k_const + 1.0))
    rng = np.random.default_rng(seed)
    surge = np.sort(rng.choice(n, n // 2, replace=False))
    demand = np.zeros((n, 2), dtype=np.int64)
    demand[:, 0] = g
    demand[surge, 1] = g
    sites = tuple(SiteSpec(i + 1, w, g, g) for i in range(n))
    instance = validate(Instance(sites, p, n * g // 2, demand))
    return HalfSurgeInstance(
        instance=instance,
        surge_sites=tuple(int(i) for i in surge),
        shipment_cost=w,
        analytic_opt_cost=w * (n / 2),
    )


@dataclass(eq=False)
class TwoSitePair:
    """Two-site pair differing only in the tail: a cheap site that may or may
    not demand again after an expensive site's long run."""

    short_tail: Instance
    long_tail: Instance
    analytic_opt_short: float
    analytic_opt_long: float


def gen_lower2(s_units: int, p: float = 1.0) -> TwoSitePair:
    """w = (0, p/2), b = c = 1.  Both sites drain at step 1; site 2 demands
    through step s.  The long-tail variant adds s more steps of site-1 demand.

    Offline costs are p*(s-1)/2 and p*(s-1) respectively.
    """
    s = int(s_units)
    if s < 2:
        raise SupplyTooSmall(f"s = {s} < 2")
    sites = (SiteSpec(1, 0.0, 1, 1), SiteSpec(2, p / 2.0, 1, 1))
    d1 = np.zeros((2, s), dtype=np.int64)
    d1[0, 0] = 1
    d1[1, :] = 1
    d2 = np.zeros((2, 2 * s), dtype=np.int64)
    d2[0, 0] = 1
    d2[1, :s] = 1
    d2[0, s:] = 1
    return TwoSitePair(
        short_tail=validate(Instance(sites, p, s, d1)),
        long_tail=validate(Instance(sites, p, s, d2)),
        analytic_opt_short=p * (s - 1) / 2.0,
        analytic_opt_long=p * (s - 1.0),
    )


@dataclass(eq=False)
class IndistinguishablePair:
    """Two instances that look identical through a given forecast channel."""

    case_id: int
    e1: Instance
    e2: Instance
    analytic_opt_e1: float
    analytic_opt_e2: float


def gen_advice_weak(case_id: int, k_const: int, p: float = 1.0) -> IndistinguishablePair:
    """Three sites, w = (0, p/2, p), b = c = 1, with two demand events.

    Case 1: identical demand streams; only the hidden supply differs
    (s = K vs s = 2K), so site-demand or lookahead forecasts cannot separate
    the events.  Case 2: same supply and same total demand, but the tail
    block lands on site 1 vs site 3, so (s, sum D) forecasts cannot separate
    them either.
    """
    K = int(k_const)
    if K < 1:
        raise ValidationError(f"k_const = {K} < 1")
    sites = (SiteSpec(1, 0.0, 1, 1), SiteSpec(2, p / 2.0, 1, 1), SiteSpec(3, p * 1.0, 1, 1))
    T = 2 * K + 1

    base = np.zeros((3, T), dtype=np.int64)
    base[:, 0] = 1
    base[1, 1 : K + 1] = 1
    if case_id == 1:
        stream = base.copy()
        stream[0, K + 1 :] = 1
        return IndistinguishablePair(
            case_id=1,
            e1=validate(Instance(sites, p, K, stream.copy())),
            e2=validate(Instance(sites, p, 2 * K, stream.copy())),
            analytic_opt_e1=K * p,
            analytic_opt_e2=K * p / 2.0,
        )
    if case_id == 2:
        e1 = base.copy()
        e1[0, K + 1 :] = 1
        e2 = base.copy()
        e2[2, K + 1 :] = 1
        return IndistinguishablePair(
            case_id=2,
            e1=validate(Instance(sites, p, K, e1)),
            e2=validate(Instance(sites, p, K, e2)),
            analytic_opt_e1=K * p,
            analytic_opt_e2=3.0 * K * p / 2.0,
        )
    raise UnknownCase(f"case_id = {case_id} (expected 1 or 2)")


@dataclass(eq=False)
class ForecastFrontierPair:
    """Shared forecast, two realities: one matches it exactly, the other
    moves the tail demand away.  Used to trace the trust/robustness frontier."""

    accurate: Instance
    inaccurate: Instance
    predictions_accurate: Predictions
    predictions_inaccurate: Predictions
    k: int
    tau: float
    analytic_opt_accurate: float
    analytic_opt_inaccurate: float


def gen_pareto(lam: float, epsilon: float, c_const: float = 1.0, p: float = 1.0) -> ForecastFrontierPair:
    """Two sites, w = (0, 2*tau/(1+tau)*p) with tau = lam*epsilon.

    Both instances share s = K+2 and the forecast (s_hat = K+2,
    d_hat = (K+1, K+1)); the accurate one realizes it exactly (eta = 0), the
    inaccurate one drops the site-1 tail (eta = K).  K is sized from the
    frontier argument so the gap dominates the additive terms.
    """
    if not 0.0 < lam <= ADVICE_FREE_LAMBDA:
        raise LambdaOutOfRange(f"lambda = {lam} outside (0, 1/3]")
    if not 0.0 < epsilon < 1.0:
        raise ValidationError(f"epsilon = {epsilon} outside (0, 1)")
    if c_const <= 0:
        raise ValidationError(f"c_const = {c_const} <= 0")
    tau = lam * epsilon
    r_lam = (1.0 + lam) ** 2 / (4.0 * lam)
    r_tau = (1.0 + tau) ** 2 / (4.0 * tau)
    gap = r_tau - r_lam
    K = int(math.floor(c_const * (1.0 + tau) / (2.0 * tau * gap) * (4.0 + 2.0 * (1.0 - tau) / tau))) + 1
    w2 = 2.0 * tau / (1.0 + tau) * p
    sites = (SiteSpec(1, 0.0, 1, 1), SiteSpec(2, w2, 1, 1))

    acc = np.zeros((2, 2 * K + 1), dtype=np.int64)
    acc[:, 0] = 1
    acc[1, 1 : K + 1] = 1
    acc[0, K + 1 :] = 1
    inacc = np.zeros((2, K + 1), dtype=np.int64)
    inacc[:, 0] = 1
    inacc[1, 1:] = 1

    accurate = validate(Instance(sites, p, K + 2, acc))
    inaccurate = validate(Instance(sites, p, K + 2, inacc))
    d_hat = np.array([K + 1.0, K + 1.0])
    return ForecastFrontierPair(
        accurate=accurate,
        inaccurate=inaccurate,
        predictions_accurate=Predictions.for_instance(accurate, K + 2.0, d_hat),
        predictions_inaccurate=Predictions.for_instance(inaccurate, K + 2.0, d_hat),
        k=K,
        tau=tau,
        analytic_opt_accurate=(K - 2) * p + 2.0 * w2,
        analytic_opt_inaccurate=K * w2,
    )


@dataclass(frozen=True)
class SiteGeo:
    """A site's planar centroid and its total pickups over the whole period."""

    site_id: int
    x: float
    y: float
    total_pickups: int


@dataclass(frozen=True)
class TaxiOptions:
    """Knobs for CSV ingestion; defaults mirror the synthetic protocol."""

    capacity: int = 10
    rho_grid: tuple[float, ...] = DEFAULT_RHO_GRID
    zones: bool = False
    split_site: str | None = None


@dataclass(eq=False)
class TaxiIngest:
    """Instance family plus the geography that produced it.

    ``site_labels[i]`` carries integer site_id ``i + 1`` in the instances;
    validation may reorder rows, so map labels to matrix rows through
    ``instance.site_ids``.
    """

    instances: dict[float, Instance]
    site_labels: tuple[str, ...]
    geo: tuple[SiteGeo, ...]
    dates: tuple[str, ...]
    warehouse: tuple[float, float]
    distance_scale: float
    p: float

    def metadata(self) -> dict[str, Any]:
        return {
            "site_labels": list(self.site_labels),
            "dates": [self.dates[0], self.dates[-1]] if self.dates else [],
            "n_dates": len(self.dates),
            "warehouse": list(self.warehouse),
            "distance_scale": self.distance_scale,
            "penalty": self.p,
            "sites": [
                {"site_id": g.site_id, "x": g.x, "y": g.y, "total_pickups": g.total_pickups}
                for g in self.geo
            ],
        }


def _read_csv(path: str | Path, required: tuple[str, ...]) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [col for col in required if col not in header]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise EmptyInput(f"{path}: no data rows")
    return rows


def _weighted_median(values: list[float], weights: list[float]) -> float:
    order = sorted(range(len(values)), key=lambda i: values[i])
    total = sum(weights)
    if total <= 0:
        return values[order[len(order) // 2]]
    acc = 0.0
    for i in order:
        acc += weights[i]
        if acc >= total / 2.0:
            return values[i]
    return values[order[-1]]


def ingest_taxi(
    demand_csv: str | Path, geo_csv: str | Path, options: TaxiOptions | None = None
) -> TaxiIngest:
    """Build an instance family from pre-aggregated pickup counts.

    Site mode (default): ``demand_csv`` has columns date,site_id,pickups and
    ``geo_csv`` has site_id,x,y in a projected planar system.  Zones mode:
    demand rows are date,zone_id,pickups and geo rows zone_id,x,y,site_id;
    site centroids are the pickup-weighted means of their zones' centroids,
    and ``split_site`` optionally splits one site into South/North halves at
    the pickup-weighted median zone y.

    Per-step demand is daily pickups, b_i is the maximum daily demand (floored
    at 1 for all-zero sites), the depot sits at the pickup-weighted centroid
    of the site centroids, w_i is the planar distance depot -> site (scaled
    down by one shared factor if any w_i/c_i exceeds 1), p = 1e-6 + max w/c,
    and the stock grid follows the synthetic protocol.
    """
    opts = options or TaxiOptions()
    if opts.capacity < 1:
        raise ValidationError(f"capacity = {opts.capacity} < 1")

    if opts.zones:
        geo_rows = _read_csv(geo_csv, ("zone_id", "x", "y", "site_id"))
        zone_xy = {r["zone_id"]: (float(r["x"]), float(r["y"])) for r in geo_rows}
        zone_site = {r["zone_id"]: r["site_id"] for r in geo_rows}
        demand_rows = _read_csv(demand_csv, ("date", "zone_id", "pickups"))

        zone_pickups: dict[str, int] = {z: 0 for z in zone_xy}
        per_zone_date: dict[tuple[str, str], int] = {}
        dates_set: set[str] = set()
        for r in demand_rows:
            zone = r["zone_id"]
            if zone not in zone_xy:
                raise MissingGeo(f"zone {zone} has demand but no coordinates")
            q = int(float(r["pickups"]))
            if q < 0:
                raise ValidationError(f"negative pickups for zone {zone} on {r['date']}")
            date = r["date"]
            dates_set.add(date)
            zone_pickups[zone] += q
            per_zone_date[(zone, date)] = per_zone_date.get((zone, date), 0) + q

        if opts.split_site is not None:
            members = [z for z, sname in zone_site.items() if sname == opts.split_site]
            if not members:
                raise ValidationError(f"split_site {opts.split_site!r} has no zones")
            median_y = _weighted_median(
                [zone_xy[z][1] for z in members],
                [float(zone_pickups[z]) for z in members],
            )
            for z in members:
                half = "South" if zone_xy[z][1] <= median_y else "North"
                zone_site[z] = f"{opts.split_site} {half}"

        site_zones: dict[str, list[str]] = {}
        for z, sname in zone_site.items():
            site_zones.setdefault(sname, []).append(z)
        labels = tuple(sorted(site_zones))
        dates = tuple(sorted(dates_set))
        if not dates:
            raise NonPositiveDates("no dates in demand input")

        label_index = {name: i for i, name in enumerate(labels)}
        date_index = {d: t for t, d in enumerate(dates)}
        demand = np.zeros((len(labels), len(dates)), dtype=np.int64)
        centroids: list[tuple[float, float]] = []
        for name in labels:
            zs = site_zones[name]
            qs = np.array([zone_pickups[z] for z in zs], dtype=np.float64)
            xs = np.array([zone_xy[z][0] for z in zs])
            ys = np.array([zone_xy[z][1] for z in zs])
            if qs.sum() > 0:
                centroids.append((float(np.dot(qs, xs) / qs.sum()), float(np.dot(qs, ys) / qs.sum())))
            else:
                centroids.append((float(xs.mean()), float(ys.mean())))
        for (zone, date), q in per_zone_date.items():
            demand[label_index[zone_site[zone]], date_index[date]] += q
    else:
        geo_rows = _read_csv(geo_csv, ("site_id", "x", "y"))
        site_xy = {r["site_id"]: (float(r["x"]), float(r["y"])) for r in geo_rows}
        demand_rows = _read_csv(demand_csv, ("date", "site_id", "pickups"))
        dates_set = set()
        per_site_date: dict[tuple[str, str], int] = {}
        seen_sites: set[str] = set()
        for r in demand_rows:
            sname = r["site_id"]
            if sname not in site_xy:
                raise MissingGeo(f"site {sname} has demand but no coordinates")
            q = int(float(r["pickups"]))
            if q < 0:
                raise ValidationError(f"negative pickups for site {sname} on {r['date']}")
            dates_set.add(r["date"])
            seen_sites.add(sname)
            per_site_date[(sname, r["date"])] = per_site_date.get((sname, r["date"]), 0) + q
        labels = tuple(sorted(site_xy))
        dates = tuple(sorted(dates_set))
        if not dates:
            raise NonPositiveDates("no dates in demand input")
        label_index = {name: i for i, name in enumerate(labels)}
        date_index = {d: t for t, d in enumerate(dates)}
        demand = np.zeros((len(labels), len(dates)), dtype=np.int64)
        for (sname, date), q in per_site_date.items():
            demand[label_index[sname], date_index[date]] += q
        centroids = [site_xy[name] for name in labels]

    totals = demand.sum(axis=1)
    geo = tuple(
        SiteGeo(i + 1, centroids[i][0], centroids[i][1], int(totals[i]))
        for i in range(len(labels))
    )
    weights_sum = float(totals.sum())
    xs = np.array([g.x for g in geo])
    ys = np.array([g.y for g in geo])
    if weights_sum > 0:
        wx = float(np.dot(totals, xs) / weights_sum)
        wy = float(np.dot(totals, ys) / weights_sum)
    else:
        wx, wy = float(xs.mean()), float(ys.mean())

    dist = np.hypot(xs - wx, ys - wy)
    c = opts.capacity
    max_ratio = float(np.max(dist / c)) if len(dist) else 0.0
    scale = 1.0 if max_ratio <= 1.0 else 1.0 / max_ratio
    w = dist * scale
    p = 1e-6 + float(np.max(w / c)) if len(w) else 1e-6

    b = np.maximum(demand.max(axis=1), 1).astype(np.int64)
    sites = tuple(
        SiteSpec(i + 1, float(w[i]), c, int(b[i])) for i in range(len(labels))
    )
    instances: dict[float, Instance] = {}
    for rho in opts.rho_grid:
        s = supply_for_rho(demand, b, rho)
        instances[rho] = validate(Instance(sites, p, s, demand.copy()))
    return TaxiIngest(
        instances=instances,
        site_labels=labels,
        geo=geo,
        dates=dates,
        warehouse=(wx, wy),
        distance_scale=scale,
        p=p,
    )
