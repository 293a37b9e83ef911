"""Command-line interface.

Subcommands: ``simulate`` one policy on one instance, ``opt`` the offline
benchmark, ``sweep`` a full experiment from a JSON config, ``gen-synthetic``
and ``gen-hard`` instance generation, and ``ingest-taxi`` CSV ingestion.  The
environment variable ``OSSA_SEED`` overrides any base seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .advice import gamma_from_predictions, load_predictions
from .engine import cost_of, run, write_trace_csv, write_trace_summary_csv
from .generators import (
    DEFAULT_RHO_GRID,
    SyntheticConfig,
    TaxiOptions,
    gen_advice_weak,
    gen_lower1,
    gen_lower2,
    gen_pareto,
    gen_synthetic,
    ingest_taxi,
)
from .harness import (
    PolicySpec,
    SweepConfig,
    audit_invariants,
    build_policy,
    run_sweep,
    summarize,
    write_rows_csv,
    write_summary_csvs,
)
from .model import load_instance, save_instance
from .offline import solve_offline
from .policies import GpaPolicy


def _seed(default: int, override: int | None = None) -> int:
    if override is not None:
        return override
    env = os.environ.get("OSSA_SEED")
    return int(env) if env else default


def _parse_rho_grid(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _cmd_simulate(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance, demand_csv=args.demand_csv)
    gamma = None
    eta_realized = None
    rho_policy = None
    if args.policy == "la-gpa" and args.predictions:
        preds = load_predictions(args.predictions, instance)
        lam = args.lam if args.lam is not None else 1.0 / 3.0
        gamma = gamma_from_predictions(instance, preds, lam)
        policy = GpaPolicy(gamma)
        eta_realized = preds.eta
    else:
        spec_kwargs: dict = {"name": args.policy}
        seed = _seed(0, args.seed)
        if args.policy == "gpa" and args.gamma:
            spec_kwargs["gamma"] = tuple(float(tok) for tok in args.gamma.split(","))
        if args.policy == "la-gpa":
            spec_kwargs["lam"] = args.lam if args.lam is not None else 1.0 / 3.0
            if args.eta_target is not None:
                spec_kwargs["eta_target"] = args.eta_target
            seed = _seed(0, args.advice_seed if args.advice_seed is not None else args.seed)
        if args.policy in ("rho-greedy", "rho-coinflip") and args.rho is not None:
            spec_kwargs["rho_source"] = args.rho
        spec = PolicySpec(**spec_kwargs)
        built = build_policy(spec, instance, _effective_rho_or_nan(instance), seed)
        policy, gamma, eta_realized = built.policy, built.gamma, built.eta_realized
        rho_policy = built.rho

    trace = run(instance, policy)
    transport, penalty, total = cost_of(trace)
    sol = solve_offline(instance)
    out = {
        "policy": args.policy,
        "transport": transport,
        "penalty": penalty,
        "total": total,
        "opt_relaxed": sol.cost_relaxed,
        "opt_rounded": sol.cost_rounded,
        "ratio_relaxed": total / sol.cost_relaxed if sol.cost_relaxed > 0 else None,
        "s_end": trace.s_end,
        "exhausted": trace.exhausted,
    }
    if eta_realized is not None:
        out["eta_realized"] = eta_realized
    if rho_policy is not None:
        out["rho_policy"] = rho_policy
    if args.policy in ("gpa", "la-gpa") and gamma is not None:
        out["invariant_violations"] = len(audit_invariants(trace, instance, gamma))
    if args.trace_out:
        write_trace_csv(trace, args.trace_out)
    if args.summary_out:
        write_trace_summary_csv(trace, args.summary_out)
    json.dump(out, sys.stdout, indent=2)
    print()
    return 0


def _effective_rho_or_nan(instance) -> float:
    slack = int(instance.total_demand().sum()) - int(instance.b_array.sum())
    return instance.s / slack if slack > 0 else float("nan")


def _cmd_opt(args: argparse.Namespace) -> int:
    instance = load_instance(args.instance, demand_csv=args.demand_csv)
    sol = solve_offline(instance)
    json.dump(sol.to_dict(), sys.stdout, indent=2)
    print()
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = SweepConfig.from_json(args.config)
    env = os.environ.get("OSSA_SEED")
    if env:
        config = SweepConfig(
            source=config.source,
            rho_grid=config.rho_grid,
            policies=config.policies,
            replications=config.replications,
            base_seed=int(env),
            workers=config.workers,
        )
    rows = run_sweep(config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    write_rows_csv(rows, outdir / "results.csv")
    write_summary_csvs(summarize(rows), outdir)
    print(f"wrote {len(rows)} rows to {outdir / 'results.csv'}")
    return 0


def _cmd_gen_synthetic(args: argparse.Namespace) -> int:
    config = SyntheticConfig(
        n=args.n,
        horizon=args.horizon,
        capacity=args.capacity,
        weight_alpha=args.alpha,
        weight_beta=args.beta,
        demand_bound_mean=args.b_mean,
        rho_grid=_parse_rho_grid(args.rho),
        seed=_seed(args.seed),
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for rho, inst in gen_synthetic(config).items():
        path = outdir / f"synthetic_rho{rho}.json"
        save_instance(inst, path)
        print(f"wrote {path}")
    return 0


def _cmd_gen_hard(args: argparse.Namespace) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    meta: dict = {"kind": args.kind}
    if args.kind == "lower1":
        res = gen_lower1(args.n, args.gamma_units, args.epsilon, args.k_const, seed=_seed(args.seed))
        save_instance(res.instance, outdir / "lower1.json")
        meta.update(
            surge_sites=list(res.surge_sites),
            shipment_cost=res.shipment_cost,
            analytic_opt_cost=res.analytic_opt_cost,
        )
    elif args.kind == "lower2":
        res = gen_lower2(args.supply, p=args.penalty)
        save_instance(res.short_tail, outdir / "lower2_e1.json")
        save_instance(res.long_tail, outdir / "lower2_e2.json")
        meta.update(analytic_opt_e1=res.analytic_opt_short, analytic_opt_e2=res.analytic_opt_long)
    elif args.kind == "advice-weak":
        res = gen_advice_weak(args.case, args.k_units, p=args.penalty)
        save_instance(res.e1, outdir / f"advice_weak_case{args.case}_e1.json")
        save_instance(res.e2, outdir / f"advice_weak_case{args.case}_e2.json")
        meta.update(case=res.case_id, analytic_opt_e1=res.analytic_opt_e1, analytic_opt_e2=res.analytic_opt_e2)
    elif args.kind == "pareto":
        res = gen_pareto(args.lam, args.epsilon, c_const=args.c_const, p=args.penalty)
        save_instance(res.accurate, outdir / "pareto_accurate.json")
        save_instance(res.inaccurate, outdir / "pareto_inaccurate.json")
        with open(outdir / "pareto_predictions.json", "w", encoding="utf-8") as fh:
            json.dump(res.predictions_accurate.to_dict(), fh)
        meta.update(
            k=res.k,
            tau=res.tau,
            analytic_opt_accurate=res.analytic_opt_accurate,
            analytic_opt_inaccurate=res.analytic_opt_inaccurate,
        )
    with open(outdir / "metadata.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    print(f"wrote {args.kind} instances to {outdir}")
    return 0


def _cmd_ingest_taxi(args: argparse.Namespace) -> int:
    options = TaxiOptions(
        capacity=args.capacity,
        rho_grid=_parse_rho_grid(args.rho),
        zones=args.zones,
        split_site=args.split_site,
    )
    result = ingest_taxi(args.demand, args.geo, options)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for rho, inst in result.instances.items():
        path = outdir / f"taxi_rho{rho}.json"
        save_instance(inst, path)
        print(f"wrote {path}")
    with open(outdir / "metadata.json", "w", encoding="utf-8") as fh:
        json.dump(result.metadata(), fh, indent=2)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ossa", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ossa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one policy on one instance")
    sim.add_argument("--instance", required=True)
    sim.add_argument("--demand-csv", default=None, help="merge demand from t,site_id,demand rows")
    sim.add_argument("--policy", required=True,
                     choices=["gpa", "la-gpa", "always-fill", "rho-greedy", "rho-coinflip", "backlog", "never"])
    sim.add_argument("--gamma", default=None, help="comma-separated per-site fractions (gpa)")
    sim.add_argument("--lambda", dest="lam", type=float, default=None, help="distrust level in (0, 1/3]")
    sim.add_argument("--eta-target", type=float, default=None, help="forecast error to inject (la-gpa)")
    sim.add_argument("--predictions", default=None, help="JSON file {s_hat, d_hat: [...]} (la-gpa)")
    sim.add_argument("--advice-seed", type=int, default=None, help="seed for forecast noise (la-gpa)")
    sim.add_argument("--rho", type=float, default=None, help="override supply fraction (rho baselines)")
    sim.add_argument("--seed", type=int, default=None, help="policy randomness seed")
    sim.add_argument("--trace-out", default=None, help="write the per-step event CSV here")
    sim.add_argument("--summary-out", default=None, help="write the per-site cost CSV here")
    sim.set_defaults(func=_cmd_simulate)

    opt = sub.add_parser("opt", help="print the offline benchmark solution")
    opt.add_argument("--instance", required=True)
    opt.add_argument("--demand-csv", default=None)
    opt.set_defaults(func=_cmd_opt)

    sweep = sub.add_parser("sweep", help="run an experiment sweep from a JSON config")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", required=True, help="output directory for result CSVs")
    sweep.set_defaults(func=_cmd_sweep)

    gen = sub.add_parser("gen-synthetic", help="generate the synthetic instance family")
    gen.add_argument("--n", type=int, default=50)
    gen.add_argument("--horizon", type=int, default=10_000)
    gen.add_argument("--capacity", type=int, default=10)
    gen.add_argument("--alpha", type=float, default=1.0)
    gen.add_argument("--beta", type=float, default=1.0)
    gen.add_argument("--b-mean", type=float, default=10.0)
    gen.add_argument("--rho", default=",".join(str(r) for r in DEFAULT_RHO_GRID))
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_gen_synthetic)

    hard = sub.add_parser("gen-hard", help="generate a hard instance construction")
    hard.add_argument("kind", choices=["lower1", "lower2", "advice-weak", "pareto"])
    hard.add_argument("--n", type=int, default=10, help="site count (lower1)")
    hard.add_argument("--gamma-units", type=int, default=1, help="units per site (lower1)")
    hard.add_argument("--epsilon", type=float, default=0.5)
    hard.add_argument("--k-const", type=float, default=1.0, help="ratio constant (lower1)")
    hard.add_argument("--k-units", type=int, default=28, help="block length K (advice-weak)")
    hard.add_argument("--supply", type=int, default=10, help="hub stock (lower2)")
    hard.add_argument("--case", type=int, default=1, choices=[1, 2], help="construction case (advice-weak)")
    hard.add_argument("--lambda", dest="lam", type=float, default=0.25, help="distrust level (pareto)")
    hard.add_argument("--c-const", type=float, default=1.0, help="additive-term constant (pareto)")
    hard.add_argument("--penalty", type=float, default=1.0)
    hard.add_argument("--seed", type=int, default=0)
    hard.add_argument("--out", required=True)
    hard.set_defaults(func=_cmd_gen_hard)

    taxi = sub.add_parser("ingest-taxi", help="build instances from pickup CSVs")
    taxi.add_argument("--demand", required=True, help="CSV date,site_id,pickups (or date,zone_id,pickups with --zones)")
    taxi.add_argument("--geo", required=True, help="CSV site_id,x,y (or zone_id,x,y,site_id with --zones)")
    taxi.add_argument("--zones", action="store_true", help="aggregate zones into sites")
    taxi.add_argument("--split-site", default=None, help="split this site North/South at the weighted median y")
    taxi.add_argument("--capacity", type=int, default=10)
    taxi.add_argument("--rho", default=",".join(str(r) for r in DEFAULT_RHO_GRID))
    taxi.add_argument("--out", required=True)
    taxi.set_defaults(func=_cmd_ingest_taxi)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
