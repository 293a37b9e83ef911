"""Experiment harness: rho sweeps over policies with seeded replications.

For every (rho, replication) the harness draws or loads an instance, solves
the offline benchmark, runs each configured policy, audits the structural
invariants of threshold-proportional traces, and emits one result row per
run.  Everything is deterministic given the base seed: per-run seeds are
derived from (base seed, rho index, policy index, replication index), so
parallel and serial execution write identical files.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .advice import gamma_from_predictions, make_predictions
from .engine import Policy, Trace, cost_of, run
from .model import GammaVector, Instance, OssaError, ValidationError, load_instance, validate
from .offline import solve_offline
from .generators import SyntheticConfig, gen_synthetic, supply_for_rho
from .policies import (
    AlwaysFillPolicy,
    BacklogPolicy,
    GpaPolicy,
    NeverRequestPolicy,
    RhoCoinFlipPolicy,
    RhoGreedyPolicy,
    default_gamma,
)

POLICY_NAMES = ("gpa", "la-gpa", "always-fill", "rho-greedy", "rho-coinflip", "backlog", "never")

_INSTANCE_STREAM = 101
_POLICY_STREAM = 202


class EmptyResults(OssaError):
    """There are no result rows to aggregate."""


def derive_seed(base_seed: int, *indices: int) -> int:
    """Stable 63-bit seed from a base seed and a tuple of indices."""
    state = np.random.SeedSequence([int(base_seed), *[int(i) for i in indices]]).generate_state(2)
    return int((int(state[0]) << 31) ^ int(state[1])) & (2**63 - 1)


def additive_cost_slack(instance: Instance) -> float:
    """3 * p * sum_i (b_i + c_i): the supply-independent slack in the cost guarantees."""
    return float(3.0 * instance.p * np.sum(instance.b_array + instance.c_array))


def audit_invariants(trace: Trace, instance: Instance, gamma: GammaVector | np.ndarray) -> list[str]:
    """Check the structural guarantees of a threshold-proportional trace.

    Verified: terminal site inventory at most b+c; cumulative grants at most
    gamma*D + b + c at every step (same float arithmetic the policy used for
    its eligibility test); grants at least gamma*D per site when the hub
    finished with stock left (exact rational arithmetic); and, when the hub
    was drained, unmet units at most the offline benchmark's unmet units plus
    sum(b+c).  Returns one message per violation; an empty list is a pass.
    """
    g = gamma.as_array() if isinstance(gamma, GammaVector) else np.asarray(gamma, dtype=np.float64)
    b, c = trace.b, trace.c
    report: list[str] = []

    over = np.nonzero(trace.terminal_stock > b + c)[0]
    for i in over:
        report.append(
            f"site {trace.site_ids[i]}: terminal stock {int(trace.terminal_stock[i])} "
            f"> b + c = {int(b[i] + c[i])}"
        )

    if trace.horizon:
        L_cum = np.cumsum(trace.grant, axis=0)
        D_cum = np.cumsum(trace.demand, axis=0)
        bad = np.argwhere(L_cum > g * D_cum + (b + c))
        for t, i in bad[:10]:
            report.append(
                f"site {trace.site_ids[i]}: cumulative grants {int(L_cum[t, i])} at step {t + 1} "
                f"exceed gamma*D + b + c"
            )

    if trace.s_end > 0:
        L = trace.grants_by_site
        D = trace.demand_by_site
        for i in range(trace.n):
            if Fraction(int(L[i])) < Fraction(float(g[i])) * int(D[i]):
                report.append(
                    f"site {trace.site_ids[i]}: grants {int(L[i])} fall short of "
                    f"gamma*D = {float(g[i]) * int(D[i])} with hub stock left"
                )

    if trace.s_end == 0:
        sol = solve_offline(instance)
        gap = int(trace.penalty_units_by_site.sum()) - sol.penalty_units
        slack = int(np.sum(b + c))
        if gap > slack:
            report.append(
                f"unmet-unit gap {gap} over the offline benchmark exceeds sum(b+c) = {slack}"
            )
    return report


@dataclass(frozen=True)
class PolicySpec:
    """One policy configuration inside a sweep.

    ``rho_source`` for the rho-fed baselines: "demand-fraction" feeds
    s / sum(D) (the share of total demand the hub can cover), "sweep" feeds
    the sweep's own rho value, and a number fixes it outright.  Coin-flip
    probabilities are clamped to 1.
    """

    name: str
    label: str = ""
    gamma: tuple[float, ...] | None = None
    lam: float | None = None
    eta_target: float | None = None
    eta_factor: float | None = None
    rho_source: str | float = "demand-fraction"

    def display_label(self) -> str:
        if self.label:
            return self.label
        if self.name == "la-gpa":
            if self.eta_target is not None:
                eta = f"{self.eta_target}"
            elif self.eta_factor is not None:
                eta = f"{self.eta_factor}s"
            else:
                eta = "0"
            return f"la-gpa(lambda={self.lam},eta={eta})"
        return self.name

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "PolicySpec":
        name = raw["name"]
        if name not in POLICY_NAMES:
            raise ValidationError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
        return cls(
            name=name,
            label=raw.get("label", ""),
            gamma=tuple(raw["gamma"]) if raw.get("gamma") is not None else None,
            lam=raw.get("lambda"),
            eta_target=raw.get("eta_target"),
            eta_factor=raw.get("eta_factor"),
            rho_source=raw.get("rho_source", "demand-fraction"),
        )


@dataclass(frozen=True)
class SweepConfig:
    """Everything a sweep needs; JSON-loadable.

    ``source`` is either {"kind": "synthetic", ...SyntheticConfig fields} or
    {"kind": "file", "path": ...}.  For file sources the rho grid rescales
    the hub stock to floor(rho * (sum D - sum b)); an empty grid runs the
    file's own stock once, reporting its effective rho.
    """

    source: dict[str, Any]
    rho_grid: tuple[float, ...]
    policies: tuple[PolicySpec, ...]
    replications: int = 1
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValidationError(f"replications = {self.replications} < 1")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "SweepConfig":
        return cls(
            source=dict(raw["source"]),
            rho_grid=tuple(raw.get("rho_grid", ())),
            policies=tuple(PolicySpec.from_dict(p) for p in raw["policies"]),
            replications=int(raw.get("replications", 1)),
            base_seed=int(raw.get("base_seed", 0)),
            workers=int(raw.get("workers", 1)),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "SweepConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(eq=False)
class ResultRow:
    """One policy run against one instance."""

    rho: float
    policy: str
    seed: int
    lam: float | None
    eta_target: float | None
    eta_realized: float | None
    transport: float
    penalty: float
    total: float
    opt_relaxed: float
    opt_rounded: float
    ratio_relaxed: float | None
    invariant_violations: int

    CSV_COLUMNS = (
        "rho", "policy", "seed", "lambda", "eta_target", "eta_realized",
        "transport", "penalty", "total", "opt_relaxed", "opt_rounded",
        "ratio_relaxed", "invariant_violations",
    )

    def as_csv_row(self) -> list[str]:
        def fmt(v: Any) -> str:
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)

        return [
            fmt(self.rho), self.policy, str(self.seed), fmt(self.lam),
            fmt(self.eta_target), fmt(self.eta_realized), fmt(self.transport),
            fmt(self.penalty), fmt(self.total), fmt(self.opt_relaxed),
            fmt(self.opt_rounded), fmt(self.ratio_relaxed), str(self.invariant_violations),
        ]


@dataclass(eq=False)
class BuiltPolicy:
    """A fresh policy plus the parameters it was actually fed."""

    policy: Policy
    gamma: GammaVector | None = None
    lam: float | None = None
    eta_target: float | None = None
    eta_realized: float | None = None
    rho: float | None = None


def build_policy(spec: PolicySpec, instance: Instance, rho_sweep: float, seed: int) -> BuiltPolicy:
    """Instantiate a single-use policy for one run."""
    if spec.name == "gpa":
        gamma = GammaVector(spec.gamma) if spec.gamma is not None else default_gamma(instance)
        return BuiltPolicy(GpaPolicy(gamma), gamma=gamma)
    if spec.name == "la-gpa":
        lam = spec.lam if spec.lam is not None else 1.0 / 3.0
        if spec.eta_target is not None:
            target = float(spec.eta_target)
        elif spec.eta_factor is not None:
            target = float(spec.eta_factor) * instance.s
        else:
            target = 0.0
        preds = make_predictions(instance, target, np.random.default_rng(seed))
        gamma = gamma_from_predictions(instance, preds, lam)
        return BuiltPolicy(
            GpaPolicy(gamma), gamma=gamma, lam=lam, eta_target=target, eta_realized=preds.eta
        )
    if spec.name == "always-fill":
        return BuiltPolicy(AlwaysFillPolicy())
    if spec.name in ("rho-greedy", "rho-coinflip"):
        if isinstance(spec.rho_source, (int, float)):
            rho = float(spec.rho_source)
        elif spec.rho_source == "sweep":
            rho = float(rho_sweep)
        else:
            total = int(instance.total_demand().sum())
            rho = instance.s / total if total > 0 else 0.0
        if spec.name == "rho-greedy":
            return BuiltPolicy(RhoGreedyPolicy(rho), rho=rho)
        return BuiltPolicy(
            RhoCoinFlipPolicy(min(1.0, rho), np.random.default_rng(seed)), rho=min(1.0, rho)
        )
    if spec.name == "backlog":
        return BuiltPolicy(BacklogPolicy())
    if spec.name == "never":
        return BuiltPolicy(NeverRequestPolicy())
    raise ValidationError(f"unknown policy {spec.name!r}")


def _effective_rho(instance: Instance) -> float:
    slack = int(instance.total_demand().sum()) - int(instance.b_array.sum())
    return instance.s / slack if slack > 0 else float("nan")


def _instance_family(config: SweepConfig, rep: int) -> list[tuple[float, Instance]]:
    kind = config.source.get("kind", "synthetic")
    if kind == "synthetic":
        fields = {k: v for k, v in config.source.items() if k != "kind"}
        if "rho_grid" not in fields:
            fields["rho_grid"] = tuple(config.rho_grid)
        fields["seed"] = derive_seed(config.base_seed, _INSTANCE_STREAM, rep)
        syn = SyntheticConfig(**{**fields, "rho_grid": tuple(fields["rho_grid"])})
        family = gen_synthetic(syn)
        return [(rho, family[rho]) for rho in syn.rho_grid]
    if kind == "file":
        inst = load_instance(config.source["path"])
        if config.rho_grid:
            out = []
            for rho in config.rho_grid:
                s = supply_for_rho(inst.demand, inst.b_array, rho)
                out.append((rho, validate(inst.replace_supply(s))))
            return out
        return [(_effective_rho(inst), inst)]
    raise ValidationError(f"unknown instance source kind {kind!r}")


def _replication_rows(config: SweepConfig, rep: int) -> list[ResultRow]:
    rows: list[ResultRow] = []
    for rho_idx, (rho, instance) in enumerate(_instance_family(config, rep)):
        sol = solve_offline(instance)
        for pol_idx, spec in enumerate(config.policies):
            seed = derive_seed(config.base_seed, _POLICY_STREAM, rho_idx, pol_idx, rep)
            built = build_policy(spec, instance, rho, seed)
            trace = run(instance, built.policy)
            transport, penalty, total = cost_of(trace)
            violations = 0
            if spec.name in ("gpa", "la-gpa"):
                assert built.gamma is not None
                violations = len(audit_invariants(trace, instance, built.gamma))
            ratio = total / sol.cost_relaxed if sol.cost_relaxed > 0 else None
            rows.append(
                ResultRow(
                    rho=float(rho),
                    policy=spec.display_label(),
                    seed=seed,
                    lam=built.lam,
                    eta_target=built.eta_target,
                    eta_realized=built.eta_realized,
                    transport=transport,
                    penalty=penalty,
                    total=total,
                    opt_relaxed=sol.cost_relaxed,
                    opt_rounded=sol.cost_rounded,
                    ratio_relaxed=ratio,
                    invariant_violations=violations,
                )
            )
    return rows


def _sort_rows(rows: list[ResultRow]) -> list[ResultRow]:
    return sorted(rows, key=lambda r: (r.rho, r.policy, r.seed))


def run_sweep(config: SweepConfig) -> list[ResultRow]:
    """Run every (rho, replication, policy) combination.

    Replications are independent tasks; with ``workers > 1`` they execute in
    separate processes.  Rows come back sorted by (rho, policy, seed) either
    way, so output files are identical.
    """
    if config.workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(_replication_rows, [config] * config.replications, range(config.replications)))
        rows = [row for chunk in chunks for row in chunk]
    else:
        rows = []
        for rep in range(config.replications):
            rows.extend(_replication_rows(config, rep))
    return _sort_rows(rows)


def write_rows_csv(rows: list[ResultRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ResultRow.CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv_row())


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def summarize(rows: list[ResultRow]) -> dict[str, list[dict[str, Any]]]:
    """Aggregate runs into per-(rho, policy) means and stds, one table per panel.

    ``costs_vs_rho`` covers every policy; ``ratios_baselines`` covers the
    advice-free policies; ``ratios_la_gpa`` covers the threshold family so
    the forecast-driven variants can be compared against their advice-free
    anchor.  Ratios average over runs where the benchmark cost is positive.
    """
    if not rows:
        raise EmptyResults("no rows to summarize")
    groups: dict[tuple[float, str], list[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.rho, row.policy), []).append(row)

    def common(values: list[float | None]) -> float | None:
        distinct = set(values)
        return values[0] if len(distinct) == 1 else None

    def cell(key: tuple[float, str], members: list[ResultRow]) -> dict[str, Any]:
        rho, policy = key
        totals = [r.total for r in members]
        ratios = [r.ratio_relaxed for r in members if r.ratio_relaxed is not None]
        mean_total, std_total = _mean_std(totals)
        out: dict[str, Any] = {
            "rho": rho,
            "policy": policy,
            "lambda": common([r.lam for r in members]),
            "eta_target": common([r.eta_target for r in members]),
            "runs": len(members),
            "mean_total": mean_total,
            "std_total": std_total,
        }
        if ratios:
            out["mean_ratio"], out["std_ratio"] = _mean_std(ratios)
        else:
            out["mean_ratio"] = out["std_ratio"] = None
        return out

    cells = [cell(k, v) for k, v in sorted(groups.items())]
    la_family = [c for c in cells if c["policy"].startswith(("gpa", "la-gpa"))]
    baselines = [c for c in cells if not c["policy"].startswith("la-gpa")]
    return {
        "costs_vs_rho": cells,
        "ratios_baselines": baselines,
        "ratios_la_gpa": la_family,
    }


def write_summary_csvs(tables: dict[str, list[dict[str, Any]]], outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    columns = ["rho", "policy", "lambda", "eta_target", "runs",
               "mean_total", "std_total", "mean_ratio", "std_ratio"]

    def fmt(value: Any) -> str:
        if value is None:
            return ""
        if isinstance(value, float):
            return repr(value)
        return str(value)

    for name, cells in tables.items():
        path = outdir / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for c in cells:
                writer.writerow([fmt(c[col]) for col in columns])
        written.append(path)
    return written
