"""Online shared-supply allocation: simulator, policies, offline benchmark,
instance generators, and an experiment harness."""

__version__ = "0.1.0"

from .advice import (
    LambdaOutOfRange,
    Predictions,
    gamma_from_predictions,
    la_gpa,
    load_predictions,
    make_predictions,
    predicted_fractions,
    tau_of_lambda,
)
from .engine import (
    AccountingMismatch,
    NegativeRequest,
    Policy,
    StateView,
    Trace,
    cost_of,
    run,
    write_trace_csv,
    write_trace_summary_csv,
)
from .generators import (
    DEFAULT_RHO_GRID,
    EmptyInput,
    MissingGeo,
    NonPositiveDates,
    OddN,
    SiteGeo,
    SupplyTooSmall,
    SyntheticConfig,
    TaxiOptions,
    UnknownCase,
    gen_advice_weak,
    gen_lower1,
    gen_lower2,
    gen_pareto,
    gen_synthetic,
    ingest_taxi,
    supply_for_rho,
)
from .harness import (
    BuiltPolicy,
    EmptyResults,
    PolicySpec,
    ResultRow,
    SweepConfig,
    additive_cost_slack,
    audit_invariants,
    build_policy,
    derive_seed,
    run_sweep,
    summarize,
    write_rows_csv,
    write_summary_csvs,
)
from .model import (
    CapacityZero,
    DemandBoundViolated,
    GammaVector,
    Instance,
    OssaError,
    PenaltyDominated,
    SiteSpec,
    ValidationError,
    demand_from_csv,
    load_instance,
    save_instance,
    validate,
)
from .offline import (
    EnumerationBudgetExceeded,
    OfflineSolution,
    brute_force_offline,
    pivotal_split,
    relaxed_lower_bound,
    solve_offline,
)
from .policies import (
    AlwaysFillPolicy,
    BacklogPolicy,
    GpaPolicy,
    NeverRequestPolicy,
    RhoCoinFlipPolicy,
    RhoGreedyPolicy,
    RhoOutOfRange,
    default_gamma,
    threshold_fractions,
)

__all__ = [name for name in dir() if not name.startswith("_")]
