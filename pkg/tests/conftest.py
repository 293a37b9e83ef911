"""Shared fixtures and oracles for the test suite.

``reference_run`` is an intentionally naive per-site re-implementation of the
event loop (plain Python ints, explicit hub countdown, no vectorization) used
to cross-check the production engine on random instances.
"""

from __future__ import annotations

import numpy as np
import pytest

from ossa import Instance, SiteSpec, validate


@pytest.fixture
def instance_e() -> Instance:
    """Two sites, p = 1, s = 3, T = 3; the shared hand-checked fixture."""
    return validate(
        {
            "penalty": 1.0,
            "supply": 3,
            "sites": [
                {"id": 1, "w": 0.1, "c": 1, "b": 1},
                {"id": 2, "w": 0.5, "c": 1, "b": 1},
            ],
            "demand": [[1, 1, 1], [1, 1, 0]],
        }
    )


def random_instance(
    rng: np.random.Generator,
    n_max: int = 10,
    t_max: int = 200,
    c_max: int = 5,
    b_max: int = 5,
    d_max: int | None = None,
    s_max: int | None = None,
) -> Instance:
    """A valid random instance: w <= p*c everywhere, demand within bounds."""
    n = int(rng.integers(1, n_max + 1))
    T = int(rng.integers(1, t_max + 1))
    c = rng.integers(1, c_max + 1, n)
    b = rng.integers(1, b_max + 1, n)
    p = float(rng.uniform(0.1, 2.0))
    w = rng.uniform(0.0, p * c)
    demand = np.zeros((n, T), dtype=np.int64)
    for i in range(n):
        hi = b[i] if d_max is None else min(d_max, int(b[i]))
        demand[i] = rng.integers(0, hi + 1, T)
    if s_max is None:
        s_max = max(1, int(demand.sum()))
    s = int(rng.integers(0, s_max + 1))
    sites = tuple(
        SiteSpec(i + 1, float(w[i]), int(c[i]), int(b[i])) for i in range(n)
    )
    return validate(Instance(sites, p, s, demand))


def reference_run(instance: Instance, policy) -> dict:
    """Scalar re-implementation of the event loop; the engine oracle.

    Drives the same policy object through duck-typed views but performs all
    granting, charging and stock updates with per-site Python loops.
    """

    class View:
        pass

    n, T = instance.n, instance.horizon
    b = [int(v) for v in instance.b_array]
    c = [int(v) for v in instance.c_array]
    w = [float(v) for v in instance.w_array]
    p = instance.p
    k = list(b)
    L = [0] * n
    D = [0] * n
    s_rem = instance.s
    transport = [0.0] * n
    penalty_units = [0] * n
    grants_log = []
    requests_log = []

    view = View()
    view.b = np.asarray(b, dtype=np.int64)
    view.c = np.asarray(c, dtype=np.int64)
    view.w = np.asarray(w, dtype=np.float64)
    view.p = p

    for t in range(T):
        d = [int(instance.demand[i, t]) for i in range(n)]
        r = [0] * n
        for i in range(n):
            if d[i] > k[i]:
                penalty_units[i] += d[i] - k[i]
                r[i] = 0
            else:
                r[i] = k[i] - d[i]
            D[i] += d[i]
        view.t = t + 1
        view.k = np.asarray(k, dtype=np.int64)
        view.r = np.asarray(r, dtype=np.int64)
        view.L = np.asarray(L, dtype=np.int64)
        view.D = np.asarray(D, dtype=np.int64)
        view.past_grants = np.asarray(grants_log, dtype=np.int64).reshape(t, n)
        req = [int(v) for v in policy.requests(view, np.asarray(d, dtype=np.int64))]
        grants = [0] * n
        for i in range(n):
            give = min(s_rem, req[i])
            grants[i] = give
            s_rem -= give
            if give > 0:
                shipments = (give + c[i] - 1) // c[i]
                transport[i] += w[i] * shipments
            L[i] += give
        view.L = np.asarray(L, dtype=np.int64)
        policy.notify_grants(np.asarray(grants, dtype=np.int64))
        for i in range(n):
            k[i] = r[i] + grants[i]
        grants_log.append(grants)
        requests_log.append(req)

    return {
        "transport": sum(transport),
        "penalty": p * sum(penalty_units),
        "total": sum(transport) + p * sum(penalty_units),
        "grants": grants_log,
        "requests": requests_log,
        "terminal_stock": k,
        "s_end": s_rem,
        "penalty_units": sum(penalty_units),
    }
