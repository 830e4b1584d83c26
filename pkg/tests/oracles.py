"""Independent reference computations used by the tests.

None of these call into the solver or set routines under test except to
read the objects being checked.
"""
import itertools

import numpy as np

from robust_retc.numerics import QpProblem


# ---------------------------------------------------------------------------
# QP: projected gradient with exact polyhedral projection
# ---------------------------------------------------------------------------

def nnls(E, f, tol=1e-12):
    """Lawson-Hanson active-set solution of ``min |E u - f|, u >= 0``."""
    m = E.shape[1]
    u = np.zeros(m)
    passive = np.zeros(m, dtype=bool)
    for _ in range(3 * m + 10):
        w = E.T @ (f - E @ u)
        cand = np.where(~passive & (w > tol))[0]
        if len(cand) == 0:
            break
        passive[cand[np.argmax(w[cand])]] = True
        while True:
            z = np.zeros(m)
            z[passive] = np.linalg.lstsq(E[:, passive], f, rcond=None)[0]
            if np.all(z[passive] > tol):
                u = z
                break
            neg = passive & (z <= tol)
            alpha = np.min(u[neg] / (u[neg] - z[neg]))
            u = u + alpha * (z - u)
            passive &= u > tol
            u[~passive] = 0.0
    return u


def ldp(G, h):
    """Least-distance point ``argmin |x| s.t. G x >= h`` (Lawson-Hanson).

    Returns ``None`` when the system is infeasible.
    """
    m, n = G.shape
    if m == 0:
        return np.zeros(n)
    E = np.vstack((G.T, h.reshape(1, -1)))
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u = nnls(E, f)
    r = E @ u - f
    if np.linalg.norm(r) < 1e-12:
        return None
    return -r[:n] / r[n]


def project(z, G, h):
    """Euclidean projection of ``z`` onto ``{x : G x <= h}``."""
    if np.all(G @ z <= h):
        return z
    y = ldp(-G, -(h - G @ z))
    return None if y is None else z + y


def pg_oracle(p: QpProblem, max_iter=20000, tol=1e-13, window=50):
    """Accelerated projected gradient with restart.  ``(status, x, value)``.

    Stops once the objective has improved by less than ``tol`` (relative)
    over the last ``window`` iterations.
    """
    H, f, G, h = p.hessian, p.linear, p.ineq_normals, p.ineq_offsets
    n = p.n
    x = project(np.zeros(n), G, h)
    if x is None:
        return "infeasible", None, np.nan
    L = max(np.linalg.eigvalsh(H)[-1], 1e-12)
    y, t = x.copy(), 1.0
    obj = p.objective
    fx = obj(x)
    hist = [fx]
    for it in range(max_iter):
        xn = project(y - (H @ y + f) / L, G, h)
        fn = obj(xn)
        if fn > fx:          # restart the momentum
            y, t = x.copy(), 1.0
        else:
            tn = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            y = xn + (t - 1) / tn * (xn - x)
            x, fx, t = xn, fn, tn
        hist.append(fx)
        if it >= window and hist[-window - 1] - fx <= tol * max(1.0, abs(fx)):
            break
    pg_oracle.iterations = it + 1
    return "optimal", x, fx


def random_qp(r, n=None, m=None, infeasible=False):
    """Random convex QP that is bounded below; optionally infeasible."""
    n = int(r.integers(1, 7)) if n is None else n
    m = int(r.integers(0, 13)) if m is None else m
    rank = int(r.integers(1, n + 1))
    M = r.normal(size=(rank, n))
    H = M.T @ M
    H /= max(np.linalg.eigvalsh(H)[-1], 1e-12)
    f = H @ r.normal(size=n) * 2.0           # f in range(H): bounded below
    x0 = r.normal(size=n)
    G = r.normal(size=(m, n))
    h = G @ x0 + r.uniform(0.0, 1.0, m)      # x0 is feasible
    if infeasible:
        if m < 2:
            G = r.normal(size=(2, n))
            h = np.zeros(2)
            m = 2
        g = G[0]
        G[1] = -g
        h[1] = -h[0] - r.uniform(0.1, 1.0)   # g x <= h0 and g x >= h0 + gap
    return QpProblem(H, f, G, h)


# ---------------------------------------------------------------------------
# sets
# ---------------------------------------------------------------------------

def support_vertices(V, D):
    """Support values of ``conv(V)`` in the rows of ``D`` by brute force."""
    return np.max(np.asarray(D) @ np.asarray(V).T, axis=1)


def sum_support(parts, D):
    """Support of ``M_1 P_1 ⊕ ... ⊕ M_k P_k`` given ``[(M_i, V_i)]``."""
    D = np.asarray(D)
    return sum(support_vertices(V @ np.asarray(M).T, D) for M, V in parts)


def containment_margin(parts, target):
    """``min_j b_j - h(a_j)`` of the sum described by ``parts`` inside ``target``."""
    return float(np.min(target.b - sum_support(parts, target.A)))


def sample_in(P, r, k):
    """``k`` points of ``P``: random convex combinations of its vertices."""
    V = P.V
    w = r.dirichlet(np.ones(len(V)) * 0.5, size=k)
    return w @ V


def in_set(P, x, tol=1e-9):
    return bool(np.all(P.A @ x <= P.b + tol))


def schedule_words(N):
    return [tuple(w) for w in itertools.product((0, 1), repeat=N)]


def gamma_definition(word, H, s):
    """Membership in the schedule set straight from its definition: first
    transmission within ``H - s - 1`` steps, later ones at most ``H`` apart,
    the last one at most ``H - 1`` before the horizon end, or else a horizon
    short enough (``N <= H - s - 1``) that anything goes."""
    N = len(word)
    if N <= H - s - 1:
        return True
    tx = [i for i, g in enumerate(word) if g]
    return (len(tx) > 0 and tx[0] <= H - s - 1
            and all(b - a <= H for a, b in zip(tx, tx[1:]))
            and N - tx[-1] <= H - 1)
