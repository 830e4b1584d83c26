import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_retc import polytope as pt
from robust_retc.polytope import Polytope


def square(r=1.0):
    return Polytope.from_box([-r, -r], [r, r])


# -- examples -----------------------------------------------------------------

def test_box_benchmark_state_set():
    X = Polytope.from_box([-20, -20], [20, 20])
    assert len(X.A) == 4 and len(X.V) == 4
    assert pt.volume(X) == pytest.approx(1600.0)


def test_interval_vertices():
    P = Polytope.from_box([-1], [1])
    assert sorted(P.V.ravel()) == [-1.0, 1.0]


def test_unit_square_with_origin_on_boundary_is_c_set():
    assert Polytope.from_box([0, 0], [1, 1]).is_c_set


def test_support_examples():
    S = square()
    assert pt.support(S, [1, 0]) == pytest.approx(1.0)
    assert pt.support(S, [1, 1]) == pytest.approx(2.0)
    T = Polytope.from_vertices([[0, 0], [2, 0], [0, 2]])
    # oracle: max over the three vertices
    assert pt.support(T, [1, 1]) == pytest.approx(max(v @ [1, 1] for v in np.array([[0, 0], [2, 0], [0, 2]])))


def test_minkowski_examples():
    P = square()
    assert pt.sets_equal(pt.minkowski_sum(P, Polytope.zero(2)), P)
    I = pt.minkowski_sum(Polytope.from_box([-1], [1]), Polytope.from_box([-2], [2]))
    assert sorted(I.V.ravel()) == pytest.approx([-3.0, 3.0])
    S = pt.minkowski_sum(P, square(0.5))
    oracle = Polytope.from_vertices([a + b for a in P.V for b in square(0.5).V])
    assert pt.sets_equal(S, oracle) and pt.sets_equal(S, square(1.5))


def test_pontryagin_examples():
    P = square()
    assert pt.sets_equal(pt.pontryagin_diff(P, Polytope.zero(2)), P)
    I = pt.pontryagin_diff(Polytope.from_box([-1], [1]), Polytope.from_box([-0.2], [0.2]))
    assert sorted(I.V.ravel()) == pytest.approx([-0.8, 0.8])
    assert pt.pontryagin_diff(P, square(1.5)).is_empty


def test_linear_image_examples():
    P = Polytope.from_box([-2, -3], [2, 3])
    assert pt.sets_equal(pt.linear_image(np.eye(2), P), P)
    Z = pt.linear_image(np.zeros((2, 2)), P)
    assert np.allclose(Z.V, 0.0)
    proj = pt.linear_image([[1.0, 0.0]], P)
    assert sorted(proj.V.ravel()) == pytest.approx([-2.0, 2.0])


def test_contains_set_examples():
    assert pt.contains_set(square(), square()) == (True, pytest.approx(0.0))
    ok, m = pt.contains_set(square(1), square(2))
    assert ok and m == pytest.approx(1.0)
    ok, m = pt.contains_set(square(2), square(1))
    assert not ok and m == pytest.approx(-1.0)


def test_scale_volume_conversion():
    assert pt.volume(pt.scale(square(), 2)) == pytest.approx(16.0)
    P = Polytope.from_halfspaces(np.vstack((np.eye(2), -np.eye(2))), np.ones(4))
    Q = pt.hrep_vrep_convert(P)
    assert sorted(map(tuple, Q.V)) == sorted(itertools.product((-1.0, 1.0), repeat=2))


def test_redundant_rows_are_dropped():
    A = np.vstack((np.eye(2), -np.eye(2), [[1.0, 1.0]]))
    P = Polytope.from_halfspaces(A, [1, 1, 1, 1, 5])
    assert len(P.V) == 4
    assert len(P.A) == 4


def test_empty_halfspace_system():
    P = Polytope.from_halfspaces([[1.0], [-1.0]], [-1.0, -1.0])
    assert P.is_empty and pt.volume(P) == 0.0


def test_record_round_trip():
    P = Polytope.from_vertices([[0, 0], [2, 0.5], [1, 2], [-1, 1]])
    Q = Polytope.from_record(P.to_record())
    assert np.array_equal(P.A, Q.A) and np.array_equal(P.V, Q.V)


# -- properties ---------------------------------------------------------------

def random_polygon(seed, n_pts=None):
    r = np.random.default_rng(seed)
    k = int(r.integers(3, 11)) if n_pts is None else n_pts
    ang = np.sort(r.uniform(0, 2 * np.pi, k))
    rad = r.uniform(0.5, 2.0, k)
    pts = np.c_[rad * np.cos(ang), rad * np.sin(ang)] + r.uniform(-0.3, 0.3, 2)
    return Polytope.from_vertices(pts)


seeds = st.integers(0, 2**31 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_hrep_vrep_round_trip(seed):
    P = random_polygon(seed)
    assert len(P.A) <= 10
    Q = Polytope.from_halfspaces(P.A, P.b)
    assert pt.margin_in(P, Q) >= -1e-9 and pt.margin_in(Q, P) >= -1e-9


@settings(max_examples=40, deadline=None)
@given(seeds, seeds)
def test_minkowski_support_additivity(s1, s2):
    P, Q = random_polygon(s1), random_polygon(s2)
    S = pt.minkowski_sum(P, Q)
    D = np.random.default_rng(s1 ^ s2).normal(size=(100, 2))
    assert np.allclose(pt.support_many(S, D), pt.support_many(P, D) + pt.support_many(Q, D), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.05, 0.6))
def test_pontryagin_then_minkowski_inside(seed, r):
    P = random_polygon(seed)
    Q = pt.scale(random_polygon(seed + 1), r)
    D = pt.pontryagin_diff(P, Q)
    if D.is_empty:
        return
    assert pt.margin_in(pt.minkowski_sum(D, Q), P) >= -1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2),
       st.lists(st.floats(0.1, 3), min_size=2, max_size=2),
       st.lists(st.floats(0.1, 3), min_size=2, max_size=2))
def test_pontryagin_minkowski_boxes(c, r1, r2):
    c, r1, r2 = map(np.asarray, (c, r1, r2))
    P = Polytope.from_box(c - r1, c + r1)
    Q = Polytope.from_box(-r2, r2)
    D = pt.pontryagin_diff(P, Q)
    if np.any(r2 > r1):
        assert D.is_empty or pt.volume(D) < 1e-12
        return
    assert pt.margin_in(pt.minkowski_sum(D, Q), P) >= -1e-9


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_linear_image_support_identity(seed):
    r = np.random.default_rng(seed)
    P = random_polygon(seed)
    M = r.normal(size=(2, 2))
    MP = pt.linear_image(M, P)
    D = r.normal(size=(50, 2))
    assert np.allclose(pt.support_many(MP, D), pt.support_many(P, D @ M), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.01, 10.0))
def test_scale_area_quadratic(seed, rho):
    P = random_polygon(seed)
    assert pt.volume(pt.scale(P, rho)) == pytest.approx(rho**2 * pt.volume(P), rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_many_facet_vertex_enumeration_matches_hull(seed):
    # the duality path against the hull of the generating points
    r = np.random.default_rng(seed)
    ang = np.sort(r.uniform(0, 2 * np.pi, 60))
    pts = np.c_[np.cos(ang), np.sin(ang)]
    P = Polytope.from_vertices(pts)
    Q = Polytope.from_halfspaces(P.A, P.b)
    assert len(Q.V) == len(P.V)
    assert pt.sets_equal(P, Q, tol=1e-9)
