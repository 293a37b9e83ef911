"""Acceptance suite: every shipped guarantee at its stated tolerance.

Each test prints one ``[PASS]``/``[FAIL]`` line (visible with ``pytest -s``)
and asserts the criterion.  Criteria 3 and 10 share one desk-scale synthetic
sweep (n = 50, T = 1000, 12 stock levels, 10 seeds).
"""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_instance
from ossa import (
    AlwaysFillPolicy,
    BacklogPolicy,
    GpaPolicy,
    Predictions,
    RhoCoinFlipPolicy,
    RhoGreedyPolicy,
    SyntheticConfig,
    additive_cost_slack,
    audit_invariants,
    brute_force_offline,
    default_gamma,
    derive_seed,
    gamma_from_predictions,
    gen_advice_weak,
    gen_lower2,
    gen_synthetic,
    make_predictions,
    predicted_fractions,
    run,
    solve_offline,
    tau_of_lambda,
)
from ossa.generators import DEFAULT_RHO_GRID

BASE_SEED = 108


def report(num: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" — {detail}" if detail else ""
    print(f"[{status}] criterion {num:2d}: {name}{suffix}")
    assert ok, f"criterion {num} failed: {name}{suffix}"


# ---------------------------------------------------------------------------
# criterion 1: greedy offline solver equals brute-force enumeration
# ---------------------------------------------------------------------------


def test_criterion_01_oracle_equivalence():
    rng = np.random.default_rng(BASE_SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        inst = random_instance(rng, n_max=3, t_max=4, c_max=3, b_max=3, d_max=3, s_max=20)
        _, brute_cost = brute_force_offline(inst)
        worst = max(worst, abs(solve_offline(inst).cost_relaxed - brute_cost))
    elapsed = time.perf_counter() - t0
    report(
        1,
        "offline solver matches brute force on 500 tiny instances",
        worst <= 1e-9 and elapsed < 10.0,
        f"max gap {worst:.2e}, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# criterion 2: structural invariants of threshold-proportional traces
# ---------------------------------------------------------------------------


def test_criterion_02_structural_invariants():
    rng = np.random.default_rng(BASE_SEED + 1)
    t0 = time.perf_counter()
    violations = 0
    for trial in range(1000):
        inst = random_instance(rng, n_max=10, t_max=200)
        gamma = default_gamma(inst) if trial % 2 == 0 else rng.uniform(0, 1, inst.n)
        trace = run(inst, GpaPolicy(gamma))
        violations += len(audit_invariants(trace, inst, gamma))
    elapsed = time.perf_counter() - t0
    report(
        2,
        "terminal stock, cumulative-grant band and drained-hub gap on 1000 runs",
        violations == 0 and elapsed < 30.0,
        f"{violations} violations, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# criteria 3 and 10 share the desk-scale synthetic sweep
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def desk_sweep():
    policies = ("gpa", "always-fill", "rho-greedy", "rho-coinflip", "backlog")
    records = []
    t0 = time.perf_counter()
    for rep in range(10):
        config = SyntheticConfig(
            n=50, horizon=1000, rho_grid=DEFAULT_RHO_GRID,
            seed=derive_seed(BASE_SEED, 3, rep),
        )
        family = gen_synthetic(config)
        for rho, inst in family.items():
            sol = solve_offline(inst)
            slack = additive_cost_slack(inst)
            total_demand = int(inst.total_demand().sum())
            rho_b1 = inst.s / total_demand if total_demand else 0.0
            for pol_idx, name in enumerate(policies):
                seed = derive_seed(BASE_SEED, 10, rep, pol_idx)
                if name == "gpa":
                    gamma = default_gamma(inst)
                    policy = GpaPolicy(gamma)
                elif name == "always-fill":
                    policy = AlwaysFillPolicy()
                elif name == "rho-greedy":
                    policy = RhoGreedyPolicy(rho_b1)
                elif name == "rho-coinflip":
                    policy = RhoCoinFlipPolicy(min(1.0, rho_b1), seed)
                else:
                    policy = BacklogPolicy()
                trace = run(inst, policy)
                audit = (
                    len(audit_invariants(trace, inst, gamma)) if name == "gpa" else 0
                )
                records.append(
                    {
                        "rho": rho,
                        "policy": name,
                        "rep": rep,
                        "total": trace.total,
                        "opt_relaxed": sol.cost_relaxed,
                        "ratio": trace.total / sol.cost_relaxed,
                        "slack": slack,
                        "violations": audit,
                    }
                )
    return {"records": records, "elapsed": time.perf_counter() - t0}


def test_criterion_03_cost_ratio_bound(desk_sweep):
    rows = [r for r in desk_sweep["records"] if r["policy"] == "gpa"]
    assert len(rows) == 120
    bad = [
        r for r in rows
        if not r["total"] <= (4.0 / 3.0) * r["opt_relaxed"] + r["slack"]
    ]
    clean = all(r["violations"] == 0 for r in rows)
    elapsed = desk_sweep["elapsed"]
    report(
        3,
        "4/3 cost bound plus additive slack on the full synthetic sweep",
        not bad and clean and elapsed < 120.0,
        f"{len(bad)} violations across {len(rows)} runs, sweep {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# criterion 4: hard constructions reproduce their closed-form optima
# ---------------------------------------------------------------------------


def test_criterion_04_hardness_analytics():
    pair = gen_lower2(10, p=1.0)
    gap1 = abs(solve_offline(pair.short_tail).cost_relaxed - 4.5)
    gap2 = abs(solve_offline(pair.long_tail).cost_relaxed - 9.0)
    K = 28
    weak = gen_advice_weak(2, K, p=1.0)
    gap3 = abs(solve_offline(weak.e2).cost_relaxed - 3.0 * K / 2.0)
    ok = max(gap1, gap2, gap3) <= 1e-9
    report(
        4,
        "two-site pair costs 4.5/9.0 and indistinguishable-pair case 2 costs 3K/2",
        ok,
        f"gaps {gap1:.2e}/{gap2:.2e}/{gap3:.2e}",
    )


# ---------------------------------------------------------------------------
# criterion 5: the distrust-to-aggressiveness map inverts exactly
# ---------------------------------------------------------------------------


def test_criterion_05_distrust_map_identity():
    rng = np.random.default_rng(BASE_SEED + 5)
    lams = [1.0 / 3.0] + [float(v) for v in rng.uniform(1e-9, 1.0 / 3.0, 99)]
    worst = 0.0
    ordered = True
    for lam in lams:
        tau = tau_of_lambda(lam)
        worst = max(worst, abs((1.0 - tau) ** 2 / (4.0 * tau) - lam))
        ordered = ordered and lam <= tau
    report(
        5,
        "(1-tau)^2/(4*tau) returns lambda and lambda <= tau on 100 samples",
        worst <= 1e-12 and ordered,
        f"max identity error {worst:.2e}",
    )


# ---------------------------------------------------------------------------
# criterion 6: consistency under perfect forecasts
# ---------------------------------------------------------------------------


def test_criterion_06_consistency_perfect_forecasts():
    rng = np.random.default_rng(BASE_SEED + 6)
    lam = 0.01
    failures = 0
    for _ in range(200):
        inst = random_instance(rng, n_max=10, t_max=200)
        preds = Predictions.perfect(inst)
        gamma = gamma_from_predictions(inst, preds, lam)
        trace = run(inst, GpaPolicy(gamma))
        sol = solve_offline(inst)
        bound = (1.0 + lam) * sol.cost_relaxed + 3.0 * preds.eta * inst.p + additive_cost_slack(inst)
        if not trace.total <= bound:
            failures += 1
    report(
        6,
        "cost within (1+lambda)*benchmark + slack with exact forecasts, lambda = 0.01",
        failures == 0,
        f"{failures} failures over 200 runs",
    )


# ---------------------------------------------------------------------------
# criterion 7: robustness under badly wrong forecasts
# ---------------------------------------------------------------------------


def test_criterion_07_robustness_bad_forecasts():
    rng = np.random.default_rng(BASE_SEED + 7)
    failures = 0
    runs = 0
    for _ in range(200):
        inst = random_instance(rng, n_max=10, t_max=200)
        preds = make_predictions(inst, 10.0 * inst.s, rng)
        sol = solve_offline(inst)
        slack = additive_cost_slack(inst)
        for lam in (0.05, 1.0 / 3.0):
            gamma = gamma_from_predictions(inst, preds, lam)
            trace = run(inst, GpaPolicy(gamma))
            ratio = 1.0 + (1.0 - lam) ** 2 / (4.0 * lam)
            runs += 1
            if not trace.total <= ratio * sol.cost_relaxed + slack:
                failures += 1
    report(
        7,
        "worst-case ratio bound with forecast error targeted at 10x supply",
        failures == 0,
        f"{failures} failures over {runs} runs",
    )


# ---------------------------------------------------------------------------
# criterion 8: forecast-deviation bound (exact rational arithmetic)
# ---------------------------------------------------------------------------


def _exact_pattern(net: list[Fraction], supply: Fraction) -> list[Fraction]:
    n = len(net)
    if supply >= sum(net):
        return [Fraction(1)] * n
    prefix = Fraction(0)
    out = [Fraction(0)] * n
    for i in range(n):
        if prefix + net[i] >= supply:
            out[i] = Fraction(1) if net[i] <= 0 else max(supply - prefix, Fraction(0)) / net[i]
            for j in range(i):
                out[j] = Fraction(1)
            return out
        prefix += net[i]
    raise AssertionError("prefix never crossed supply below total")


def test_criterion_08_forecast_deviation_bound():
    rng = np.random.default_rng(BASE_SEED + 8)
    failures = 0
    max_drift = 0.0
    for k in range(500):
        inst = random_instance(rng, n_max=8, t_max=30)
        if k % 3 == 0:
            preds = Predictions.perfect(inst)
        elif k % 3 == 1:
            preds = make_predictions(inst, float(rng.uniform(0, 10 * max(1, inst.s))), rng)
        else:
            d_hat = rng.uniform(0, 2.0 * max(1.0, float(inst.total_demand().max() if inst.horizon else 1)), inst.n)
            preds = Predictions.for_instance(inst, float(rng.uniform(0, 3 * max(1, inst.s))), d_hat)

        sol = solve_offline(inst)
        N = [int(v) for v in sol.net_demand]
        if inst.s == 0 and sum(N) > 0:
            gamma_star = [Fraction(0)] * inst.n
        else:
            gamma_star = _exact_pattern([Fraction(v) for v in N], Fraction(inst.s))
        net_hat = [
            max(Fraction(float(preds.d_hat[i])) - int(inst.b_array[i]), Fraction(0))
            for i in range(inst.n)
        ]
        gamma_hat = _exact_pattern(net_hat, Fraction(preds.s_hat))
        lhs = sum(N[i] * abs(gamma_star[i] - gamma_hat[i]) for i in range(inst.n))
        D = [int(v) for v in inst.total_demand()]
        rhs = abs(Fraction(inst.s) - Fraction(preds.s_hat)) + 3 * sum(
            abs(Fraction(D[i]) - Fraction(float(preds.d_hat[i]))) for i in range(inst.n)
        )
        if lhs > rhs:
            failures += 1
        _, _, float_pattern = predicted_fractions(inst, preds)
        max_drift = max(
            max_drift,
            max(abs(float(gamma_hat[i]) - float(float_pattern[i])) for i in range(inst.n)),
        )
    report(
        8,
        "weighted fraction deviation within |s - s_hat| + 3*sum|D - D_hat| on 500 pairs",
        failures == 0 and max_drift <= 1e-9,
        f"{failures} failures, float pattern drift {max_drift:.2e}",
    )


# ---------------------------------------------------------------------------
# criterion 9: the advice-free setting reproduces the default policy exactly
# ---------------------------------------------------------------------------


def test_criterion_09_advice_free_collapse():
    rng = np.random.default_rng(BASE_SEED + 9)
    identical = 0
    for _ in range(100):
        inst = random_instance(rng, n_max=8, t_max=60)
        preds = make_predictions(inst, float(rng.uniform(0, 20 * max(1, inst.s))), rng)
        gamma = gamma_from_predictions(inst, preds, 1.0 / 3.0)
        a = run(inst, GpaPolicy(gamma))
        b = run(inst, GpaPolicy(default_gamma(inst)))
        if a.identical_to(b) and gamma.values == default_gamma(inst).values:
            identical += 1
    report(
        9,
        "forecast-driven policy at lambda = 1/3 is bit-identical to the default",
        identical == 100,
        f"{identical}/100 traces identical",
    )


# ---------------------------------------------------------------------------
# criterion 10: qualitative sweep trends
# ---------------------------------------------------------------------------


def test_criterion_10_sweep_trends(desk_sweep):
    records = desk_sweep["records"]

    def mean_ratio(policy: str, rho: float) -> float:
        vals = [r["ratio"] for r in records if r["policy"] == policy and r["rho"] == rho]
        assert len(vals) == 10
        return float(np.mean(vals))

    scarce = [0.1, 0.2, 0.3, 0.4, 0.5]
    baselines = ("always-fill", "rho-greedy", "rho-coinflip", "backlog")
    dominates = all(
        mean_ratio("gpa", rho) <= mean_ratio(base, rho)
        for rho in scarce
        for base in baselines
    )
    saturates = all(
        mean_ratio(base, 1.2) <= 1.05
        for base in ("always-fill", "rho-greedy", "rho-coinflip")
    )
    detail = "gpa@0.1={:.3f} vs always-fill@0.1={:.3f}; always-fill@1.2={:.3f}".format(
        mean_ratio("gpa", 0.1), mean_ratio("always-fill", 0.1), mean_ratio("always-fill", 1.2)
    )
    report(
        10,
        "threshold policy dominates baselines under scarcity; fill-style ratios saturate",
        dominates and saturates,
        detail,
    )
