"""Policy request rules, their boundary cases, and structural guarantees."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import random_instance
from ossa import (
    AlwaysFillPolicy,
    BacklogPolicy,
    GpaPolicy,
    Instance,
    NeverRequestPolicy,
    RhoCoinFlipPolicy,
    RhoGreedyPolicy,
    RhoOutOfRange,
    SiteSpec,
    audit_invariants,
    default_gamma,
    run,
    validate,
)
from ossa.policies import refill_units, threshold_fractions


class _FakeView:
    def __init__(self, **kw):
        for key, value in kw.items():
            setattr(self, key, np.asarray(value) if isinstance(value, (list, tuple)) else value)


def _gpa_single_request(gamma, r, b, c, L, D, demand):
    """Drive one requests() call with a hand-built state."""
    policy = GpaPolicy([gamma])
    policy._L = np.array([L], dtype=np.int64)
    policy._D = np.array([D - demand], dtype=np.int64)
    view = _FakeView(
        t=1,
        k=np.array([r + demand], dtype=np.int64),
        r=np.array([r], dtype=np.int64),
        L=np.array([L], dtype=np.int64),
        D=np.array([D], dtype=np.int64),
        b=np.array([b], dtype=np.int64),
        c=np.array([c], dtype=np.int64),
        w=np.array([0.1]),
        p=1.0,
    )
    return int(policy.requests(view, np.array([demand], dtype=np.int64))[0])


def test_gpa_request_rule_examples():
    # eligibility uses grants through the previous step vs demand incl. now
    assert _gpa_single_request(2 / 3, r=0, b=1, c=1, L=0, D=1, demand=1) == 1
    assert _gpa_single_request(2 / 3, r=0, b=1, c=1, L=1, D=2, demand=1) == 1
    # gamma = 0 still permits the first refill: 0 <= 0
    assert _gpa_single_request(0.0, r=0, b=1, c=1, L=0, D=1, demand=1) == 1
    assert _gpa_single_request(0.0, r=0, b=1, c=1, L=1, D=5, demand=1) == 0
    # stocked site never requests
    assert _gpa_single_request(1.0, r=1, b=1, c=1, L=0, D=1, demand=0) == 0


def test_default_gamma_formula(instance_e):
    gamma = default_gamma(instance_e)
    assert gamma.values[0] == 1.0
    assert gamma.values[1] == pytest.approx(2.0 / 3.0)

    free = validate(
        Instance((SiteSpec(1, 0.0, 1, 1),), 1.0, 0, np.zeros((1, 1), dtype=np.int64))
    )
    assert default_gamma(free).values == (1.0,)


def test_threshold_fractions_shared_path(instance_e):
    lo = threshold_fractions(instance_e, 0.1)
    hi = threshold_fractions(instance_e, 1.0 / 3.0)
    assert np.all(lo <= hi)
    assert np.array_equal(hi, default_gamma(instance_e).as_array())


def test_refill_units_rounding():
    b = np.array([5, 5, 1], dtype=np.int64)
    r = np.array([3, 5, 0], dtype=np.int64)
    c = np.array([10, 10, 1], dtype=np.int64)
    assert refill_units(b, r, c).tolist() == [10, 0, 1]


def test_always_fill_examples():
    view = _FakeView(
        r=np.array([0, 3, 5], dtype=np.int64),
        b=np.array([1, 5, 5], dtype=np.int64),
        c=np.array([1, 10, 10], dtype=np.int64),
    )
    req = AlwaysFillPolicy().requests(view, np.zeros(3, dtype=np.int64))
    assert req.tolist() == [1, 10, 0]


def test_rho_greedy_one_equals_always_fill(instance_e):
    t_greedy = run(instance_e, RhoGreedyPolicy(1.0))
    t_fill = run(instance_e, AlwaysFillPolicy())
    assert t_greedy.identical_to(t_fill)

    rng = np.random.default_rng(23)
    for _ in range(10):
        inst = random_instance(rng, n_max=5, t_max=40)
        assert run(inst, RhoGreedyPolicy(1.0)).identical_to(run(inst, AlwaysFillPolicy()))


def test_rho_greedy_zero_refills_once():
    inst = validate(
        Instance(
            (SiteSpec(1, 0.1, 1, 1),),
            1.0,
            10,
            np.ones((1, 5), dtype=np.int64),
        )
    )
    trace = run(inst, RhoGreedyPolicy(0.0))
    # 0 <= 0 holds at the first step only; after one granted unit, never again
    assert trace.grant.sum() == 1
    assert trace.grant[0, 0] == 1


def test_rho_greedy_on_e_engine_replay(instance_e):
    trace = run(instance_e, RhoGreedyPolicy(3.0 / 5.0))
    assert trace.grant.tolist() == [[1, 1], [1, 0], [0, 0]]
    assert trace.total == pytest.approx(0.7)


def test_rho_greedy_rejects_negative():
    with pytest.raises(RhoOutOfRange):
        RhoGreedyPolicy(-0.1)


def test_rho_coinflip_limits(instance_e):
    t_never = run(instance_e, RhoCoinFlipPolicy(0.0, 1))
    assert t_never.identical_to(run(instance_e, NeverRequestPolicy()))
    t_fill = run(instance_e, RhoCoinFlipPolicy(1.0, 1))
    assert t_fill.identical_to(run(instance_e, AlwaysFillPolicy()))
    with pytest.raises(RhoOutOfRange):
        RhoCoinFlipPolicy(1.2, 1)


def test_rho_coinflip_seed_reproducible():
    rng = np.random.default_rng(2)
    inst = random_instance(rng, n_max=6, t_max=50)
    a = run(inst, RhoCoinFlipPolicy(0.5, 99))
    b = run(inst, RhoCoinFlipPolicy(0.5, 99))
    assert a.identical_to(b)


def test_backlog_waits_for_cost_threshold():
    # w = 3, c = 3 (so w <= p*c), p = 1: a request fires when unmet reaches 3
    inst = validate(
        Instance(
            (SiteSpec(1, 3.0, 3, 1),),
            1.0,
            100,
            np.ones((1, 5), dtype=np.int64),
        )
    )
    trace = run(inst, BacklogPolicy())
    # t=1 served by initial stock; unmet accumulates 1,2,3 over t=2..4
    assert trace.request[:, 0].tolist() == [0, 0, 0, 3, 0]
    assert trace.grant[3, 0] == 3


def test_backlog_free_shipping_degenerates_to_refill_on_shortfall():
    inst = validate(
        Instance(
            (SiteSpec(1, 0.0, 1, 2),),
            1.0,
            100,
            np.array([[1, 1, 0, 1]], dtype=np.int64),
        )
    )
    t_backlog = run(inst, BacklogPolicy())
    t_fill = run(inst, AlwaysFillPolicy())
    assert t_backlog.identical_to(t_fill)


def test_backlog_never_unmet_never_requests():
    # stock dips below b but demand is always served: the accumulator stays 0
    inst = validate(
        Instance(
            (SiteSpec(1, 2.0, 2, 2),),
            1.0,
            100,
            np.array([[1, 0, 1, 0]], dtype=np.int64),
        )
    )
    trace = run(inst, BacklogPolicy())
    assert trace.penalty_units.sum() == 0
    assert trace.request.sum() == 0


def test_gpa_requests_are_full_shipments():
    rng = np.random.default_rng(31)
    for _ in range(15):
        inst = random_instance(rng, n_max=6, t_max=40)
        trace = run(inst, GpaPolicy(default_gamma(inst)))
        assert np.all(trace.request % inst.c_array == 0)


def test_gpa_structural_invariants_random():
    rng = np.random.default_rng(37)
    for _ in range(50):
        inst = random_instance(rng, n_max=8, t_max=60)
        gamma = (
            default_gamma(inst)
            if rng.random() < 0.5
            else np.round(rng.uniform(0, 1, inst.n), 6)
        )
        trace = run(inst, GpaPolicy(gamma))
        assert audit_invariants(trace, inst, gamma) == []


def test_gpa_full_trust_ample_supply_no_penalty():
    rng = np.random.default_rng(41)
    for _ in range(10):
        inst = random_instance(rng, n_max=5, t_max=30)
        ample = validate(inst.replace_supply(int(inst.total_demand().sum())))
        trace = run(ample, GpaPolicy([1.0] * ample.n))
        assert trace.penalty == 0.0


def test_policies_are_single_run(instance_e):
    policy = GpaPolicy(default_gamma(instance_e))
    run(instance_e, policy)
    with pytest.raises(AssertionError):
        run(instance_e, policy)
