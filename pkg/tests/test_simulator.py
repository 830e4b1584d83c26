import csv
import io

import numpy as np
import pytest

from robust_retc import invariant_sets as inv
from robust_retc.invariant_sets import ActuatorKind
from robust_retc.simulator import (DisturbanceKind, DisturbanceMode, PropertyFailure, SimConfig,
                                   check_trace, initial_states, run_closed_loop, sample_uncertainty)

from conftest import KINDS
from oracles import in_set


def bench_sim(mode="extremal_fixed", steps=51, **kw):
    return SimConfig(steps, mode, [6.0, -2.0], [0.0], **kw)


# -- uncertainty samples ------------------------------------------------------------

def test_sample_uncertainty_modes(plant):
    r = np.random.default_rng(0)
    w, v = sample_uncertainty(DisturbanceMode(DisturbanceKind.ZERO), 0, plant.W, plant.V, r)
    assert np.all(w == 0) and np.all(v == 0)
    w, v = sample_uncertainty(DisturbanceMode(), 3, plant.W, plant.V, r)
    assert np.allclose(w, [0.002, 0.002]) and np.allclose(v, [0.001])
    sw = DisturbanceMode.parse("extremal_switching")
    assert np.allclose(sample_uncertainty(sw, 0, plant.W, plant.V, r)[0], [0.002, 0.002])
    assert np.allclose(sample_uncertainty(sw, 1, plant.W, plant.V, r)[0], [-0.002, -0.002])


def test_uniform_reproducible(plant):
    mode = DisturbanceMode.parse("uniform:42")
    assert mode.seed == 42 and str(mode) == "uniform:42"
    draws = []
    for _ in range(2):
        r = np.random.default_rng(mode.seed)
        draws.append([sample_uncertainty(mode, k, plant.W, plant.V, r) for k in range(20)])
    for (w1, v1), (w2, v2) in zip(*draws):
        assert np.array_equal(w1, w2) and np.array_equal(v1, v2)
        assert in_set(plant.W, w1, 0.0) and in_set(plant.V, v1, 0.0)


# -- closed loop --------------------------------------------------------------------

@pytest.mark.parametrize("kind", KINDS)
def test_equilibrium(contexts, kind):
    ctx = contexts[kind]
    tr = run_closed_loop(ctx, SimConfig(20, "zero", [0.0, 0.0], [0.0]))
    assert all(np.all(x.x_p == 0) for x in tr.x)
    assert all(abs(v) < 1e-12 for v in tr.ocp_value)
    rep = check_trace(tr, ctx)
    assert rep.passed, rep.lines()


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("mode", ["zero", "extremal_fixed", "extremal_switching"])
def test_tube_deterministic_modes(contexts, kind, mode):
    ctx = contexts[kind]
    tr = run_closed_loop(ctx, bench_sim(mode, steps=30))
    rep = check_trace(tr, ctx)
    for name in ("feasible", "state_constraints", "input_constraints", "bucket", "tube_observer",
                 "tube_real", "transmission_gap", "counter", "observer_simulators"):
        assert rep.checks[name][0], (name, rep.checks[name])


@pytest.mark.parametrize("kind", KINDS)
def test_tube_uniform_seeds(contexts, kind):
    ctx = contexts[kind]
    for seed in range(20):
        tr = run_closed_loop(ctx, bench_sim(f"uniform:{seed}", steps=30))
        rep = check_trace(tr, ctx)
        assert rep.checks["tube_real"][0] and rep.checks["tube_observer"][0], (seed, rep.lines())
        assert rep.checks["counter"][0] and rep.checks["observer_simulators"][0]


def test_trace_shape_and_counter(contexts):
    tr = run_closed_loop(contexts[ActuatorKind.ZOH], bench_sim(steps=25))
    assert len(tr.x) == len(tr.xhat) == len(tr.xbar) == len(tr.xtilde) == 26
    assert len(tr.u) == len(tr.s) == 25
    assert tr.gammas[0] == 1 and tr.s[0] == 0
    for k in range(1, 25):
        assert tr.s[k] == (0 if tr.gammas[k - 1] else tr.s[k - 1] + 1)


def test_prediction_auxiliary_error_recursion(contexts, plant):
    ctx = contexts[ActuatorKind.PREDICTION_BASED]
    tr = run_closed_loop(ctx, bench_sim("uniform:5", steps=40))
    sums = {i: inv.accumulated_disturbance(plant.A, ctx.observer.Delta_p, i) for i in range(1, 6)}
    for k in range(tr.steps):
        e1 = tr.xhat[k].x_p - tr.xtilde[k].x_p
        if tr.gammas[k]:
            assert np.all(e1 == 0)
        else:
            assert in_set(sums[tr.s[k] + 1], e1, 1e-9)


def test_fault_injection_breaks_tube(contexts):
    ctx = contexts[ActuatorKind.PREDICTION_BASED]
    tr = run_closed_loop(ctx, bench_sim(steps=20, fault_step=5, fault_scale=200.0))
    rep = check_trace(tr, ctx)
    ok, margin = rep.checks["tube_real"]
    assert not ok and margin < 0


def test_strict_infeasible_abort(contexts):
    ctx = contexts[ActuatorKind.ZOH]
    with pytest.raises(PropertyFailure):
        run_closed_loop(ctx, SimConfig(5, "extremal_fixed", [19.9, 19.9], [0.0]))
    tr = run_closed_loop(ctx, SimConfig(1, "zero", [19.9, 19.9], [0.0], strict=False))
    assert tr.feasible == [False] and not check_trace(tr, ctx).checks["feasible"][0]


def test_initial_estimate_clipped_into_psi(contexts, net):
    ctx = contexts[ActuatorKind.ZOH]
    x, xhat, xbar = initial_states(ctx, SimConfig(1, "zero", [6.0, -2.0], [0.0], xhat0=[7.0, -2.0]), net)
    assert in_set(ctx.observer.Psi_p, x.x_p - xhat.x_p, 1e-12)
    assert np.array_equal(xhat.x_p, xbar.x_p) and xhat.beta == net.beta0


def test_determinism_and_csv(contexts):
    ctx = contexts[ActuatorKind.LOCAL_MEASUREMENT]
    a = run_closed_loop(ctx, bench_sim("uniform:9", steps=15)).to_csv()
    b = run_closed_loop(ctx, bench_sim("uniform:9", steps=15)).to_csv()
    assert a == b
    rows = list(csv.reader(io.StringIO(a)))
    assert rows[0][:4] == ["k", "x_p0", "x_p1", "u_s0"]
    assert rows[0][-4:] == ["s", "N", "ocp_value", "feasible"]
    assert len(rows) == 17 and all(len(r) == len(rows[0]) for r in rows)
    # 17 significant digits round-trip exactly
    tr = run_closed_loop(ctx, bench_sim("uniform:9", steps=15))
    assert float(rows[3][1]) == tr.x[2].x_p[0]
