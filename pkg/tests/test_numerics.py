import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_retc import numerics as nm
from robust_retc.numerics import QpProblem, QpStatus, solve_qp

from oracles import pg_oracle, random_qp


# -- QP examples ----------------------------------------------------------------

def sq(c):
    # (x - c)^2 = 0.5 * 2 x^2 - 2 c x + c^2
    return dict(hessian=[[2.0]], linear=[-2.0 * c], constant=c * c)


@pytest.mark.parametrize("method", ["auto", "primal"])
def test_qp_active_bound(method):
    r = solve_qp(QpProblem(**sq(1.0), ineq_normals=[[1.0]], ineq_offsets=[0.5]), method=method)
    assert r.optimal
    assert r.solution[0] == pytest.approx(0.5)
    assert r.value == pytest.approx(0.25)
    assert r.active_set == [0]


@pytest.mark.parametrize("method", ["auto", "primal"])
def test_qp_unconstrained(method):
    r = solve_qp(QpProblem(**sq(1.0)), method=method)
    assert r.optimal and r.solution[0] == pytest.approx(1.0) and abs(r.value) < 1e-12


@pytest.mark.parametrize("method", ["auto", "primal"])
def test_qp_contradictory_bounds_infeasible(method):
    p = QpProblem([[2.0]], [0.0], [[1.0], [-1.0]], [-1.0, -1.0])
    r = solve_qp(p, method=method)
    assert r.status is QpStatus.INFEASIBLE
    y = r.certificate
    # Farkas: y >= 0, y'G = 0, y'h < 0
    assert np.all(y >= -1e-12) and np.allclose(y @ p.ineq_normals, 0.0) and y @ p.ineq_offsets < 0


def test_qp_halfplane_against_grid():
    p = QpProblem(2 * np.eye(2), [0.0, 0.0], [[-1.0, -1.0]], [-1.0])
    r = solve_qp(p)
    # oracle: minimize x^2 + (1 - x)^2 on a fine grid of the line x + y = 1
    t = np.linspace(-2, 3, 500001)
    grid = t**2 + (1 - t) ** 2
    assert r.solution == pytest.approx([0.5, 0.5], abs=1e-9)
    assert r.value == pytest.approx(grid.min(), abs=1e-9)
    assert r.value == pytest.approx(0.5)


def test_qp_rejects_indefinite_hessian():
    with pytest.raises(ValueError):
        QpProblem([[1.0, 0.0], [0.0, -1.0]], [0.0, 0.0])


def test_qp_dual_requires_definite():
    with pytest.raises(ValueError):
        solve_qp(QpProblem(np.zeros((1, 1)), [0.0], [[1.0]], [1.0]), method="dual")


def test_qp_semidefinite_unbounded_direction_blocked():
    # linear term along the null space of H, bounded by a constraint
    p = QpProblem(np.diag([1.0, 0.0]), [0.0, -1.0], [[0.0, 1.0]], [2.0])
    r = solve_qp(p)
    assert r.optimal and r.solution[1] == pytest.approx(2.0) and r.value == pytest.approx(-2.0)


def test_qp_semidefinite_unbounded_raises():
    with pytest.raises(nm.UnboundedQpError):
        solve_qp(QpProblem(np.diag([1.0, 0.0]), [0.0, -1.0]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_qp_matches_oracle_and_kkt(seed):
    r = np.random.default_rng(seed)
    p = random_qp(r)
    res = solve_qp(p)
    status, _, value = pg_oracle(p)
    assert status == "optimal" and res.optimal
    assert res.value == pytest.approx(value, abs=1e-5)
    # result invariants: feasibility and stationarity
    assert np.all(p.ineq_normals @ res.solution <= p.ineq_offsets + 1e-8)
    assert nm.kkt_residual(p, res) <= 1e-7


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_qp_primal_and_dual_agree(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(1, 7))
    M = r.normal(size=(n, n))
    p = random_qp(r, n=n)
    p = QpProblem(M.T @ M + 0.1 * np.eye(n), p.linear, p.ineq_normals, p.ineq_offsets)
    a, b = solve_qp(p, method="dual"), solve_qp(p, method="primal")
    assert a.optimal and b.optimal
    assert a.value == pytest.approx(b.value, abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_qp_infeasible_flagged(seed):
    r = np.random.default_rng(seed)
    p = random_qp(r, infeasible=True)
    assert pg_oracle(p)[0] == "infeasible"
    assert solve_qp(p).status is QpStatus.INFEASIBLE


# -- eigenvalues ------------------------------------------------------------------

def test_eigen_examples():
    assert np.allclose(nm.symmetric_eigenvalues(np.eye(2)), [1, 1])
    assert np.allclose(sorted(nm.symmetric_eigenvalues(np.diag([3.0, -1.0]))), [-1, 3])
    # characteristic polynomial (2 - l)^2 - 1 = 0 gives 1 and 3
    assert np.allclose(sorted(nm.symmetric_eigenvalues([[2.0, 1.0], [1.0, 2.0]])), [1, 3])


def test_eigen_rejects_asymmetric():
    with pytest.raises(ValueError):
        nm.symmetric_eigenvalues([[1.0, 2.0], [0.0, 1.0]])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 8))
def test_eigen_trace_identity(seed, n):
    M = np.random.default_rng(seed).normal(size=(n, n))
    M = M + M.T
    w = nm.symmetric_eigenvalues(M)
    assert np.trace(M.T @ M) == pytest.approx(np.sum(w**2), rel=1e-9)


# -- Riccati / Lyapunov -----------------------------------------------------------

def test_dare_scalar_golden_ratio():
    P, K = nm.dare_gain([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    golden = (1 + np.sqrt(5)) / 2          # root of p^2 - p - 1 = 0
    assert P[0, 0] == pytest.approx(golden, abs=1e-10)
    assert K[0, 0] == pytest.approx(-golden / (1 + golden), abs=1e-10)
    assert K[0, 0] == pytest.approx(-0.6180, abs=1e-4)
    # independent fixed point of the scalar recursion
    p = 1.0
    for _ in range(200):
        p = 1 + p - p * p / (1 + p)
    assert P[0, 0] == pytest.approx(p, abs=1e-12)


def test_dare_zero_dynamics():
    Q = np.diag([2.0, 3.0])
    P, K = nm.dare_gain(np.zeros((2, 2)), np.ones((2, 1)), Q, [[1.0]])
    assert np.allclose(P, Q) and np.allclose(K, 0.0)


def test_dare_no_input_reduces_to_lyapunov():
    P, K = nm.dare_gain([[0.5]], [[0.0]], [[1.0]], [[1.0]])
    assert P[0, 0] == pytest.approx(4 / 3) and K[0, 0] == 0.0


def test_dare_unstabilizable_raises():
    with pytest.raises(nm.ConvergenceError):
        nm.dare_gain([[2.0]], [[0.0]], [[1.0]], [[1.0]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_dare_properties(seed):
    r = np.random.default_rng(seed)
    n, m = int(r.integers(1, 4)), int(r.integers(1, 3))
    A = r.normal(size=(n, n))
    B = r.normal(size=(n, m))
    Q = np.eye(n) * r.uniform(0.5, 5)
    R = np.eye(m) * r.uniform(0.1, 5)
    P, K = nm.dare_gain(A, B, Q, R)
    assert nm.spectral_radius(A + B @ K) < 1
    assert nm.riccati_residual(A, B, Q, R, P) <= 1e-9 * max(1.0, np.abs(P).max())


def test_dlyap_examples():
    assert nm.dlyap([[0.5]], [[1.0]])[0, 0] == pytest.approx(4 / 3)
    assert np.allclose(nm.dlyap(np.zeros((2, 2)), np.eye(2)), np.eye(2))
    # partial sums of the geometric series 0.81^j
    series = sum(0.81**j for j in range(2000))
    assert nm.dlyap([[0.9]], [[1.0]])[0, 0] == pytest.approx(series, rel=1e-12)
    assert series == pytest.approx(5.2632, abs=1e-4)


def test_dlyap_rejects_unstable():
    with pytest.raises(ValueError):
        nm.dlyap([[1.0]], [[1.0]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_dlyap_residual(seed, n):
    r = np.random.default_rng(seed)
    A = r.normal(size=(n, n))
    A *= r.uniform(0.05, 0.98) / nm.spectral_radius(A)
    Qh = r.normal(size=(n, n))
    Q = Qh @ Qh.T
    P = nm.dlyap(A, Q)
    assert np.max(np.abs(A.T @ P @ A - P + Q)) <= 1e-10 * max(1.0, np.abs(P).max())
