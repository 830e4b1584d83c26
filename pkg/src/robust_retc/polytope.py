"""Convex polytopes in low dimension with a lazily synchronized dual representation.

A :class:`Polytope` stores a half-space description ``{x : A x <= b}`` and/or a
vertex list.  Explicit operations (conversion, Minkowski sums, images) are
limited to dimension three; support functions and containment tests work in
any dimension once vertices are known.

Lower-dimensional sets (points, segments, flat polygons) are stored with pairs
of opposite facets ``a'x <= c``, ``-a'x <= -c`` spanning their affine hull.
"""
from __future__ import annotations

import itertools
import threading

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

#: Absolute slack used for facet membership and containment margins.
TOL = 1e-9

MAX_EXPLICIT_DIM = 3


class UnsupportedDimensionError(ValueError):
    pass


class EmptyPolytopeError(ValueError):
    pass


def set_tolerance(tol):
    """Set the global geometric tolerance (default ``1e-9``)."""
    global TOL
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    TOL = float(tol)


# ---------------------------------------------------------------------------
# hull / enumeration kernels
# ---------------------------------------------------------------------------

def _hull_2d(points):
    """Indices of the convex hull of full-dimensional 2-D points, CCW order."""
    order = np.lexsort((points[:, 1], points[:, 0]))
    pts = points[order]
    scale = max(1.0, float(np.ptp(pts, axis=0).max()))
    eps = 1e-12 * scale * scale

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for i in range(len(pts)):
        while len(lower) >= 2 and cross(pts[lower[-2]], pts[lower[-1]], pts[i]) <= eps:
            lower.pop()
        lower.append(i)
    for i in range(len(pts) - 1, -1, -1):
        while len(upper) >= 2 and cross(pts[upper[-2]], pts[upper[-1]], pts[i]) <= eps:
            upper.pop()
        upper.append(i)
    hull = lower[:-1] + upper[:-1]
    return order[hull]


def _full_hull(z):
    """Facets ``(A, b)`` and vertex indices of full-dimensional points ``z``."""
    r = z.shape[1]
    if r == 1:
        lo, hi = int(np.argmin(z[:, 0])), int(np.argmax(z[:, 0]))
        return np.array([[1.0], [-1.0]]), np.array([z[hi, 0], -z[lo, 0]]), [lo, hi]
    if r == 2:
        try:
            idx = ConvexHull(z).vertices  # counter-clockwise in 2-D
        except QhullError:
            idx = _hull_2d(z)
        p = z[idx]
        q = np.roll(p, -1, axis=0)
        d = q - p
        normals = np.column_stack((d[:, 1], -d[:, 0]))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        return normals, np.einsum("ij,ij->i", normals, p), list(idx)
    hull = ConvexHull(z)
    eq = hull.equations
    normals, offsets = eq[:, :-1], -eq[:, -1]
    normals, offsets = _merge_facets(normals, offsets)
    return normals, offsets, list(hull.vertices)


def _merge_facets(A, b):
    """Drop duplicate facets (same unit normal within tolerance, keep loosest offset)."""
    keep_A, keep_b = [], []
    for a, off in zip(A, b):
        for k, ka in enumerate(keep_A):
            if np.linalg.norm(ka - a) <= 1e-9:
                keep_b[k] = max(keep_b[k], off)
                break
        else:
            keep_A.append(a)
            keep_b.append(off)
    return np.array(keep_A).reshape(-1, A.shape[1]), np.array(keep_b)


def _canonical_from_points(points):
    """Minimal H-representation and extreme points of ``conv(points)``.

    The affine hull is detected by repeatedly peeling off principal directions
    with negligible spread; facets of the reduced hull are lifted back and the
    flat directions become opposite facet pairs.
    """
    points = np.unique(np.asarray(points, dtype=float), axis=0)
    n = points.shape[1]
    diam = max(1.0, float(np.ptp(points, axis=0).max()) if len(points) > 1 else 1.0)
    center = points.mean(axis=0)
    X = points - center
    if len(points) > 1:
        _, _, Vt = np.linalg.svd(X, full_matrices=len(points) < n)
    else:
        Vt = np.eye(n)
    basis, flat = [], []
    for v in Vt:
        proj = X @ v
        if len(points) > 1 and np.ptp(proj) > TOL * diam:
            basis.append(v)
        else:
            flat.append(v)
    rows, offs = [], []
    if basis:
        U = np.array(basis).T
        Az, bz, idx = _full_hull(X @ U)
        for a, off in zip(Az, bz):
            rows.append(U @ a)
            offs.append(off + (U @ a) @ center)
        verts = points[idx]
    else:
        verts = points[:1]
    for v in flat:
        proj = points @ v
        rows.extend([v, -v])
        offs.extend([proj.max(), -proj.min()])
    return np.array(rows).reshape(-1, n), np.array(offs), verts


def _enumerate_vertices(A, b):
    """All feasible basic points of ``{x : A x <= b}`` (possibly with repeats)."""
    m, n = A.shape
    if n == 1:
        a = A[:, 0]
        if np.any((np.abs(a) <= 1e-14) & (b < -TOL)):
            return np.zeros((0, 1))
        up = b[a > 1e-14] / a[a > 1e-14]
        lo = b[a < -1e-14] / a[a < -1e-14]
        if len(up) == 0 or len(lo) == 0:
            raise ValueError("unbounded 1-D half-space set")
        hi, low = up.min(), lo.max()
        if low > hi + TOL:
            return np.zeros((0, 1))
        if low > hi:
            low = hi = 0.5 * (low + hi)
        return np.array([[low], [hi]])
    if m > n + 1:
        pts = _vertices_by_duality(A, b)
        if pts is not None:
            return pts
    combos = np.array(list(itertools.combinations(range(m), n)), dtype=int)
    if len(combos) == 0:
        return np.zeros((0, n))
    M = A[combos]
    rhs = b[combos]
    det = np.linalg.det(M)
    ok = np.abs(det) > 1e-12
    if not np.any(ok):
        return np.zeros((0, n))
    sol = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    slack = sol @ A.T - b[None, :]
    feasible = np.all(slack <= TOL * np.maximum(1.0, np.abs(sol).max(axis=1, keepdims=True)), axis=1)
    return sol[feasible]


def _interior_point(A, b):
    """Centre of a ball inside ``{A x <= b}`` (rows unit length) and its radius."""
    scale = max(1.0, float(np.max(np.abs(b))))
    if np.min(b) > 1e-6 * scale:
        return np.zeros(A.shape[1]), float(np.min(b))
    n = A.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.hstack((A, np.ones((len(b), 1)))), b_ub=b,
                  bounds=[(None, None)] * n + [(0, scale)], method="highs")
    if res.status != 0:
        return None, 0.0
    return res.x[:n], float(res.x[-1])


def _vertices_by_duality(A, b):
    """Vertices of a full-dimensional bounded ``{A x <= b}`` from the hull of
    the polar points ``a_i / (b_i - a_i x_c)``; ``None`` when not applicable."""
    n = A.shape[1]
    A, b, _ = _normalize(A, b)
    xc, r = _interior_point(A, b)
    if xc is None or r <= 1e-7 * max(1.0, float(np.max(np.abs(b)))):
        return None
    bs = b - A @ xc
    P = A / bs[:, None]
    if np.linalg.matrix_rank(P - P.mean(axis=0), tol=1e-12) < n:
        return None
    try:
        F, o, _ = _full_hull(P)
    except Exception:
        return None
    if np.any(o <= 1e-14):
        return None  # origin on the dual boundary: unbounded primal
    return F / o[:, None] + xc


def _normalize(A, b):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms <= 1e-14):
        bad = norms <= 1e-14
        if np.any(b[bad] < -TOL):
            return A[:0], b[:0], True
        A, b, norms = A[~bad], b[~bad], norms[~bad]
    return A / norms[:, None], b / norms, False


# ---------------------------------------------------------------------------
# Polytope
# ---------------------------------------------------------------------------

class Polytope:
    """Bounded convex polytope with half-space and vertex representations.

    Use the constructors :meth:`from_box`, :meth:`from_vertices`,
    :meth:`from_halfspaces`, :meth:`point` and :meth:`empty` rather than the
    raw initializer.  Instances are treated as immutable; the lazily computed
    representation is guarded by a lock so sharing across threads is safe.
    """

    def __init__(self, dim, A=None, b=None, V=None, is_empty=False):
        self.dim = int(dim)
        self._A = None if A is None else np.asarray(A, dtype=float).reshape(-1, self.dim)
        self._b = None if b is None else np.asarray(b, dtype=float).reshape(-1)
        self._V = None if V is None else np.asarray(V, dtype=float).reshape(-1, self.dim)
        self._empty = bool(is_empty)
        self._lock = threading.Lock()

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_box(cls, lower, upper):
        """Axis-aligned box; every ``lower[i] < upper[i]`` is required."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape:
            raise ValueError("bound vectors differ in length")
        if np.any(lower >= upper):
            raise ValueError("degenerate box: need lower < upper in every coordinate")
        return cls.from_bounds(lower, upper)

    @classmethod
    def from_bounds(cls, lower, upper):
        """Box that may be flat in some coordinates (``lower <= upper``)."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        n = len(lower)
        A = np.vstack((np.eye(n), -np.eye(n)))
        b = np.concatenate((upper, -lower))
        corners = np.array(list(itertools.product(*zip(lower, upper))))
        V = np.unique(corners, axis=0)
        if n == 2 and len(V) == 4:
            V = np.array([[lower[0], lower[1]], [upper[0], lower[1]],
                          [upper[0], upper[1]], [lower[0], upper[1]]])
        return cls(n, A, b, V)

    @classmethod
    def from_vertices(cls, V):
        V = np.atleast_2d(np.asarray(V, dtype=float))
        if V.shape[0] == 0:
            raise ValueError("need at least one point")
        if V.shape[1] > MAX_EXPLICIT_DIM:
            return cls(V.shape[1], V=V)
        A, b, verts = _canonical_from_points(V)
        return cls(V.shape[1], A, b, verts)

    @classmethod
    def from_halfspaces(cls, A, b):
        A, b, infeasible = _normalize(A, b)
        dim = A.shape[1]
        if infeasible:
            return cls.empty(dim)
        return cls(dim, A=A, b=b)

    @classmethod
    def point(cls, x):
        return cls.from_vertices(np.atleast_2d(np.asarray(x, dtype=float)))

    @classmethod
    def zero(cls, dim):
        return cls.point(np.zeros(dim))

    @classmethod
    def empty(cls, dim):
        return cls(dim, A=np.zeros((0, dim)), b=np.zeros(0), V=np.zeros((0, dim)), is_empty=True)

    # -- representations ----------------------------------------------------

    def _ensure_vrep(self):
        if self._V is not None:
            return
        with self._lock:
            if self._V is not None:
                return
            if self.dim > MAX_EXPLICIT_DIM:
                raise UnsupportedDimensionError(
                    f"vertex enumeration limited to dim <= {MAX_EXPLICIT_DIM}, got {self.dim}")
            pts = _enumerate_vertices(self._A, self._b)
            if len(pts) == 0:
                self._empty = True
                self._V = np.zeros((0, self.dim))
                return
            A, b, V = _canonical_from_points(pts)
            self._A, self._b, self._V = A, b, V

    def _ensure_hrep(self):
        if self._A is not None:
            return
        with self._lock:
            if self._A is not None:
                return
            if self.dim > MAX_EXPLICIT_DIM:
                raise UnsupportedDimensionError(
                    f"facet enumeration limited to dim <= {MAX_EXPLICIT_DIM}, got {self.dim}")
            A, b, V = _canonical_from_points(self._V)
            self._A, self._b, self._V = A, b, V

    @property
    def A(self):
        self._ensure_hrep()
        return self._A

    @property
    def b(self):
        self._ensure_hrep()
        return self._b

    @property
    def V(self):
        self._ensure_vrep()
        return self._V

    @property
    def has_hrep(self):
        return self._A is not None

    @property
    def has_vrep(self):
        return self._V is not None

    @property
    def is_empty(self):
        if self._empty:
            return True
        if self._V is None and self.dim <= MAX_EXPLICIT_DIM:
            self._ensure_vrep()
        return self._empty

    @property
    def is_c_set(self):
        """Nonempty and contains the origin (compactness is assumed throughout)."""
        return not self.is_empty and self.contains_point(np.zeros(self.dim))

    # -- queries ------------------------------------------------------------

    def support(self, d):
        return support(self, d)

    def contains_point(self, x, tol=None):
        tol = TOL if tol is None else tol
        x = np.asarray(x, dtype=float).reshape(-1)
        if self.is_empty:
            return False
        return bool(np.all(self.A @ x <= self.b + tol))

    def volume(self):
        return volume(self)

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Polytope):
            return minkowski_sum(self, other)
        return translate(self, other)

    def __sub__(self, other):
        if isinstance(other, Polytope):
            return pontryagin_diff(self, other)
        return translate(self, -np.asarray(other, dtype=float))

    def __neg__(self):
        return linear_image(-np.eye(self.dim), self)

    def __rmatmul__(self, M):
        return linear_image(M, self)

    def __mul__(self, rho):
        return scale(self, rho)

    __rmul__ = __mul__

    def __repr__(self):
        if self._empty:
            return f"Polytope(dim={self.dim}, empty)"
        parts = [f"dim={self.dim}"]
        if self._A is not None:
            parts.append(f"facets={len(self._A)}")
        if self._V is not None:
            parts.append(f"vertices={len(self._V)}")
        return "Polytope(" + ", ".join(parts) + ")"

    # -- serialization ------------------------------------------------------

    def to_record(self, with_vertices=True):
        """Plain-data record: ``dim``, facet rows ``A``/``b`` and optionally ``V``."""
        rec = {"dim": self.dim, "empty": self.is_empty,
               "A": self.A.tolist(), "b": self.b.tolist()}
        if with_vertices and self.dim <= MAX_EXPLICIT_DIM:
            rec["V"] = self.V.tolist()
        return rec

    @classmethod
    def from_record(cls, rec):
        dim = int(rec["dim"])
        if rec.get("empty", False):
            return cls.empty(dim)
        A = np.asarray(rec["A"], dtype=float).reshape(-1, dim)
        b = np.asarray(rec["b"], dtype=float).reshape(-1)
        V = rec.get("V")
        V = None if V is None else np.asarray(V, dtype=float).reshape(-1, dim)
        return cls(dim, A, b, V)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def from_box(lower, upper):
    return Polytope.from_box(lower, upper)


def support(P, d):
    """Support function ``h_P(d) = max_{x in P} d'x``."""
    d = np.asarray(d, dtype=float).reshape(-1)
    if d.shape[0] != P.dim:
        raise ValueError("direction dimension mismatch")
    if not np.any(d):
        raise ValueError("support direction must be nonzero")
    if P.dim <= MAX_EXPLICIT_DIM or P.has_vrep:
        if P.is_empty:
            raise EmptyPolytopeError("support function of an empty polytope")
        return float(np.max(P.V @ d))
    res = linprog(-d, A_ub=P.A, b_ub=P.b, bounds=[(None, None)] * P.dim, method="highs")
    if res.status == 2:
        raise EmptyPolytopeError("support function of an empty polytope")
    if res.status != 0:
        raise ValueError(f"support LP failed: {res.message}")
    return float(-res.fun)


def support_many(P, D):
    """Support values for each row of ``D``."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if P.is_empty:
        raise EmptyPolytopeError("support function of an empty polytope")
    return np.max(D @ P.V.T, axis=1)


def _check_same_dim(P, Q):
    if P.dim != Q.dim:
        raise ValueError(f"dimension mismatch: {P.dim} vs {Q.dim}")


def minkowski_sum(P, Q):
    _check_same_dim(P, Q)
    if P.dim > MAX_EXPLICIT_DIM:
        raise UnsupportedDimensionError("Minkowski sum limited to dim <= 3")
    if P.is_empty or Q.is_empty:
        return Polytope.empty(P.dim)
    sums = (P.V[:, None, :] + Q.V[None, :, :]).reshape(-1, P.dim)
    return Polytope.from_vertices(sums)


def minkowski_sum_all(sets, dim):
    """Fold :func:`minkowski_sum` over ``sets``; the empty fold is ``{0}``."""
    out = Polytope.zero(dim)
    for S in sets:
        out = minkowski_sum(out, S)
    return out


def pontryagin_diff(P, Q):
    """``P ⊖ Q = {x : x + Q ⊆ P}``; the result may be empty."""
    _check_same_dim(P, Q)
    if Q.is_empty:
        raise EmptyPolytopeError("Pontryagin difference by an empty set")
    if P.is_empty:
        return Polytope.empty(P.dim)
    h = support_many(Q, P.A)
    out = Polytope(P.dim, A=P.A, b=P.b - h)
    if out.dim <= MAX_EXPLICIT_DIM:
        out._ensure_vrep()
    return out


def linear_image(M, P):
    """``{M x : x in P}`` for a (possibly rank-deficient) matrix ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != P.dim:
        raise ValueError(f"matrix has {M.shape[1]} columns, polytope dim is {P.dim}")
    if P.is_empty:
        return Polytope.empty(M.shape[0])
    return Polytope.from_vertices(P.V @ M.T)


def translate(P, t):
    t = np.asarray(t, dtype=float).reshape(-1)
    if P.is_empty:
        return P
    return Polytope(P.dim, P.A, P.b + P.A @ t, P.V + t)


def scale(P, rho):
    if rho < 0:
        raise ValueError("scale factor must be nonnegative")
    if P.is_empty:
        return P
    if rho == 0:
        return Polytope.zero(P.dim)
    return Polytope(P.dim, P.A, rho * P.b, rho * P.V)


def cartesian_product(P, Q):
    if P.is_empty or Q.is_empty:
        return Polytope.empty(P.dim + Q.dim)
    V = np.array([np.concatenate((p, q)) for p in P.V for q in Q.V])
    A = np.block([[P.A, np.zeros((len(P.A), Q.dim))],
                  [np.zeros((len(Q.A), P.dim)), Q.A]])
    return Polytope(P.dim + Q.dim, A, np.concatenate((P.b, Q.b)), V)


def contains_set(P, Q):
    """Test ``P ⊆ Q`` through support functions of ``P`` on the facets of ``Q``.

    Returns
    -------
    (bool, float)
        Whether the inclusion holds within :data:`TOL`, and the margin
        ``min_i (b_i - h_P(a_i))`` over the facets ``(a_i, b_i)`` of ``Q``.
    """
    _check_same_dim(P, Q)
    if P.is_empty:
        return True, np.inf
    if Q.is_empty:
        return False, -np.inf
    if len(Q.A) == 0:
        return True, np.inf
    margin = float(np.min(Q.b - support_many(P, Q.A)))
    return margin >= -TOL, margin


def margin_in(P, Q):
    """Containment margin of ``P`` inside ``Q`` (see :func:`contains_set`)."""
    return contains_set(P, Q)[1]


def sets_equal(P, Q, tol=None):
    tol = TOL if tol is None else tol
    return margin_in(P, Q) >= -tol and margin_in(Q, P) >= -tol


def volume(P):
    """Length (1-D) or area (2-D); zero for empty or flat sets."""
    if P.dim > 2:
        raise UnsupportedDimensionError("volume implemented for dim <= 2")
    if P.is_empty:
        return 0.0
    V = P.V
    if P.dim == 1:
        return float(V.max() - V.min())
    if len(V) < 3:
        return 0.0
    x, y = V[:, 0], V[:, 1]
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def hrep_vrep_convert(P):
    """Return a copy with both representations populated."""
    if P.dim > MAX_EXPLICIT_DIM:
        raise UnsupportedDimensionError("conversion limited to dim <= 3")
    if P.is_empty:
        return Polytope.empty(P.dim)
    return Polytope(P.dim, P.A.copy(), P.b.copy(), P.V.copy())


def is_subset_scaling(P, Q):
    """Smallest ``t >= 0`` with ``P ⊆ t Q`` (``Q`` must contain 0 in its interior)."""
    if np.any(Q.b <= TOL):
        raise ValueError("scaling target must contain the origin in its interior")
    if P.is_empty:
        return 0.0
    return max(0.0, float(np.max(support_many(P, Q.A) / Q.b)))
