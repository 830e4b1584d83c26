import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_retc import system as sm
from robust_retc.polytope import Polytope
from robust_retc.system import NcsInput, NcsState, NetworkSpec


def scalar_plant(a=1.0, b=1.0, c=1.0):
    box = Polytope.from_box([-1], [1])
    return sm.PlantModel([[a]], [[b]], [[c]], box, box, box, box, [[1.0]], [[1.0]])


# -- token bucket ----------------------------------------------------------------

def test_bucket_examples(net):
    assert sm.token_bucket_step(10, 1, net) == 8
    assert sm.token_bucket_step(10, 0, net) == 10
    assert sm.token_bucket_step(2, 1, net) == 0


def test_bucket_violation_names_step(net):
    with pytest.raises(sm.TokenBucketViolation, match="step 7"):
        sm.token_bucket_step(1, 1, net, k=7)


def test_network_validation():
    assert NetworkSpec(1, 3, 10, 10).M == 3
    assert NetworkSpec(2, 3, 10, 10).M == 2
    with pytest.raises(ValueError):
        NetworkSpec(1, 3, 10, 1)           # cannot transmit at k = 0
    with pytest.raises(ValueError):
        NetworkSpec(4, 3, 10, 10)          # g > c
    with pytest.raises(ValueError):
        NetworkSpec(1, 3, 10, 11)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=80),
       st.integers(1, 3), st.integers(0, 4), st.integers(0, 6))
def test_bucket_safety_and_rate(wants, g, dc, db):
    c = g + dc
    b = c + db
    net = NetworkSpec(g, c, b, b)
    beta, sent = net.beta0, 0
    for want in wants:
        gamma = int(want and beta + g - c >= 0)   # accepted inputs only
        beta = sm.token_bucket_step(beta, gamma, net)
        sent += gamma
        assert 0 <= beta <= b
    assert sent <= (net.beta0 + g * len(wants)) / c


# -- NCS dynamics ----------------------------------------------------------------

def test_ncs_step_hold(plant, net):
    x = NcsState([6.0, -2.0], [0.0], 10)
    nxt = sm.ncs_step(x, NcsInput([3.0], 0, [0.0]), [0.0, 0.0], plant, net)
    # by hand: (6 + 0.1 * -2, -2)
    assert np.allclose(nxt.x_p, [5.8, -2.0], atol=1e-15)
    assert nxt.u_s[0] == 0.0 and nxt.beta == 10


def test_ncs_step_transmission(plant, net):
    x = NcsState([0.0, 0.0], [1.0], 10)
    nxt = sm.ncs_step(x, NcsInput([2.5], 1, [0.5]), [0.0, 0.0], plant, net)
    assert nxt.u_s[0] == 2.5 and nxt.beta == 8
    assert np.allclose(nxt.x_p, np.ravel(plant.B) * 3.0)


def test_ncs_step_strict_membership(plant, net):
    x = NcsState([0.0, 0.0], [0.0], 10)
    u = NcsInput([0.0], 0, [0.0])
    with pytest.raises(sm.MembershipViolation):
        sm.ncs_step(x, u, [0.01, 0.0], plant, net)
    nxt = sm.ncs_step(x, u, [0.01, 0.0], plant, net, strict=False)
    assert nxt.x_p[0] == pytest.approx(0.01)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 40))
def test_hold_matches_matrix_power(benchmark, seed, K):
    plant, net = benchmark
    r = np.random.default_rng(seed)
    x0 = r.uniform(-5, 5, 2)
    us = r.uniform(-3, 3, 1)
    x = NcsState(x0, us, 10)
    for _ in range(K):
        x = sm.ncs_step(x, NcsInput([0.0], 0, [0.0]), np.zeros(2), plant, net)
        assert x.u_s[0] == us[0]
    A, B = plant.A, plant.B
    closed = np.linalg.matrix_power(A, K) @ x0 + sum(np.linalg.matrix_power(A, j) for j in range(K)) @ B @ us
    assert np.allclose(x.x_p, closed, atol=1e-12)


# -- observer and output -----------------------------------------------------------

def test_observer_examples(plant):
    u = [0.3]
    xh = np.array([1.0, 2.0])
    open_loop = plant.A @ xh + plant.B @ u
    assert np.allclose(sm.observer_step(xh, u, [7.0], np.zeros((2, 1)), plant), open_loop)
    y = plant.C @ xh
    assert np.allclose(sm.observer_step(xh, u, y, [[0.4], [0.9]], plant), open_loop)


def test_observer_scalar():
    # zero input, so the input matrix plays no role
    p = scalar_plant()
    assert sm.observer_step([0.0], [0.0], [2.0], [[0.5]], p)[0] == pytest.approx(1.0)


def test_plant_output(plant):
    assert np.allclose(sm.plant_output([6.0, -2.0], [0.0], plant), [6.0])
    assert sm.plant_output([6.0, -2.0], [0.001], plant)[0] == pytest.approx(6.001)
    assert sm.plant_output([0.0, 0.0], [0.0], plant)[0] == 0.0
    with pytest.raises(sm.MembershipViolation):
        sm.plant_output([0.0, 0.0], [0.01], plant)


# -- plant validation ----------------------------------------------------------------

def test_rank_tests():
    A = np.diag([1.2, 0.5])
    assert sm.is_stabilizable(A, [[1.0], [0.0]])
    assert not sm.is_stabilizable(A, [[0.0], [1.0]])
    assert sm.is_detectable(A, [[1.0, 0.0]])
    assert not sm.is_detectable(A, [[0.0, 1.0]])
    assert not sm.is_controllable(A, [[1.0], [0.0]])


def test_plant_rejects_bad_data(plant):
    with pytest.raises(ValueError):
        scalar_plant(a=2.0, b=0.0)
    with pytest.raises(ValueError):
        sm.with_sets(plant, W=Polytope.from_box([0.1, 0.1], [0.2, 0.2]))
    with pytest.raises(ValueError):
        sm.with_sets(plant, R=[[-1.0]])


def test_benchmark_data(plant, net):
    assert np.allclose(plant.A, [[1, 0.1], [0, 1]]) and np.allclose(plant.B.ravel(), [0.005, 0.1])
    assert (net.g, net.c, net.b, net.beta0, net.M) == (1, 3, 10, 10, 3)
