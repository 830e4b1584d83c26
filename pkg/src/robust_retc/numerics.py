"""Dense numerical kernels: inequality-constrained convex QP, eigenvalues,
discrete Riccati and Lyapunov solvers."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog


@dataclass(frozen=True)
class NumericsConfig:
    psd_tol: float = 1e-9
    feas_tol: float = 1e-8
    kkt_tol: float = 1e-7
    symmetry_tol: float = 1e-10
    qp_max_iter: int = 500
    riccati_tol: float = 1e-12
    riccati_max_iter: int = 10_000
    lyap_residual_tol: float = 1e-10


DEFAULTS = NumericsConfig()


class ConvergenceError(RuntimeError):
    pass


class UnboundedQpError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# eigenvalues
# ---------------------------------------------------------------------------

def symmetric_eigenvalues(M, cfg=DEFAULTS):
    """Eigenvalues of a symmetric matrix in ascending order."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(M - M.T), initial=0.0) > cfg.symmetry_tol:
        raise ValueError("matrix is not symmetric")
    return np.linalg.eigvalsh(0.5 * (M + M.T))


def spectral_radius(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0


def min_eig(M):
    return float(symmetric_eigenvalues(0.5 * (M + np.transpose(M)))[0])


# ---------------------------------------------------------------------------
# Riccati / Lyapunov
# ---------------------------------------------------------------------------

def dare_gain(A, B, Q, R, cfg=DEFAULTS):
    """Stabilizing solution of the discrete algebraic Riccati equation.

    Iterates ``P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA`` from ``P = Q``.

    Returns
    -------
    P : ndarray
    K : ndarray
        Gain with the convention ``u = K x``, i.e. ``K = -(R + B'PB)^-1 B'PA``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = Q.copy()
    diff = np.inf
    for it in range(cfg.riccati_max_iter):
        BtP = B.T @ P
        G = R + BtP @ B
        with np.errstate(over="ignore", invalid="ignore"):
            P_next = Q + A.T @ P @ A - (BtP @ A).T @ np.linalg.solve(G, BtP @ A)
        P_next = 0.5 * (P_next + P_next.T)
        diff = np.max(np.abs(P_next - P))
        P = P_next
        if not np.all(np.isfinite(P)):
            raise ConvergenceError(f"Riccati iteration diverged after {it + 1} steps (pair not stabilizable?)")
        if diff <= cfg.riccati_tol * max(1.0, np.max(np.abs(P))):
            break
    else:
        raise ConvergenceError(
            f"Riccati iteration did not converge in {cfg.riccati_max_iter} steps "
            f"(last update {diff:.3e}, |P|max {np.max(np.abs(P)):.3e})")
    K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    rho = spectral_radius(A + B @ K)
    if rho >= 1.0:
        raise ConvergenceError(f"Riccati gain is not stabilizing (spectral radius {rho:.6f})")
    return P, K


def riccati_residual(A, B, Q, R, P):
    BtP = B.T @ P
    res = Q + A.T @ P @ A - (BtP @ A).T @ np.linalg.solve(R + BtP @ B, BtP @ A) - P
    return float(np.max(np.abs(res)))


def dlyap(A, Q, cfg=DEFAULTS):
    """Solve ``A'PA - P + Q = 0`` for Schur ``A`` by the doubling series."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    rho = spectral_radius(A)
    if rho >= 1.0:
        raise ValueError(f"dlyap requires a Schur matrix (spectral radius {rho:.6f})")
    P = Q.copy()
    Ak = A.copy()
    for _ in range(200):
        P = P + Ak.T @ P @ Ak
        Ak = Ak @ Ak
        if np.max(np.abs(Ak), initial=0.0) < 1e-18:
            break
    P = 0.5 * (P + P.T)
    res = np.max(np.abs(A.T @ P @ A - P + Q), initial=0.0)
    if res > cfg.lyap_residual_tol * max(1.0, np.max(np.abs(P))):
        raise ConvergenceError(f"Lyapunov residual {res:.3e} above tolerance")
    return P


# ---------------------------------------------------------------------------
# QP
# ---------------------------------------------------------------------------

class QpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"


@dataclass
class QpProblem:
    """``min 0.5 x'Hx + f'x + constant  s.t.  G x <= h``."""

    hessian: np.ndarray
    linear: np.ndarray
    ineq_normals: np.ndarray = None
    ineq_offsets: np.ndarray = None
    constant: float = 0.0

    def __post_init__(self):
        self.hessian = np.atleast_2d(np.asarray(self.hessian, dtype=float))
        n = self.hessian.shape[0]
        self.linear = np.asarray(self.linear, dtype=float).reshape(n)
        if self.ineq_normals is None:
            self.ineq_normals = np.zeros((0, n))
            self.ineq_offsets = np.zeros(0)
        self.ineq_offsets = np.asarray(self.ineq_offsets, dtype=float).reshape(-1)
        self.ineq_normals = np.asarray(self.ineq_normals, dtype=float).reshape(len(self.ineq_offsets), n)
        if len(self.ineq_offsets) != len(self.ineq_normals):
            raise ValueError("constraint rows and offsets differ in count")
        if n and np.max(np.abs(self.hessian - self.hessian.T)) > 1e-10 * max(1.0, np.max(np.abs(self.hessian))):
            raise ValueError("hessian is not symmetric")
        self.hessian = 0.5 * (self.hessian + self.hessian.T)
        if n and np.linalg.eigvalsh(self.hessian)[0] < -DEFAULTS.psd_tol:
            raise ValueError("hessian is not positive semidefinite")

    @property
    def n(self):
        return self.hessian.shape[0]

    def objective(self, x):
        return float(0.5 * x @ self.hessian @ x + self.linear @ x + self.constant)


@dataclass
class QpResult:
    status: QpStatus
    solution: np.ndarray
    value: float
    active_set: list = field(default_factory=list)
    multipliers: np.ndarray = None
    certificate: np.ndarray = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status is QpStatus.OPTIMAL


def _phase_one(G, h, cfg):
    """Feasible point of ``G x <= h``, or a Farkas certificate ``y >= 0``,
    ``y'G = 0``, ``y'h < 0``."""
    m, n = G.shape
    # minimize t  s.t.  G x - t <= h,  t >= 0
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack((G, -np.ones((m, 1))))
    bounds = [(None, None)] * n + [(0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=h, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"phase-one LP failed: {res.message}")
    x, t = res.x[:n], res.x[-1]
    if t <= cfg.feas_tol:
        return x, None
    y = -np.asarray(res.ineqlin.marginals)
    return None, y


def solve_qp(p: QpProblem, cfg=DEFAULTS, method="auto") -> QpResult:
    """Solve a convex QP.

    ``method="dual"`` is the Goldfarb-Idnani dual active-set method and needs
    a positive definite hessian; ``"primal"`` is a primal active-set method
    from a phase-one point and also handles semidefinite hessians.  ``"auto"``
    picks the dual method whenever the hessian admits a Cholesky factor.
    """
    if method not in ("auto", "dual", "primal"):
        raise ValueError(f"unknown QP method {method!r}")
    if method != "primal" and p.n:
        L = _cholesky_or_none(p.hessian, cfg)
        if L is not None:
            return _solve_qp_dual(p, L, cfg)
        if method == "dual":
            raise ValueError("dual method needs a positive definite hessian")
    return _solve_qp_primal(p, cfg)


def _cholesky_or_none(H, cfg):
    w = np.linalg.eigvalsh(H)
    if w[0] <= max(cfg.psd_tol, 1e-13 * w[-1]):
        return None
    try:
        return np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return None


def _solve_qp_dual(p: QpProblem, L, cfg) -> QpResult:
    """Goldfarb-Idnani dual active-set method for ``G x <= h``.

    Starts from the unconstrained minimizer and adds violated constraints one
    at a time while keeping the active normals linearly independent, so no
    phase one is needed and infeasibility shows up as a dependent violated
    constraint with no dual step available.
    """
    H, f, G, h = p.hessian, p.linear, p.ineq_normals, p.ineq_offsets
    n, m = p.n, len(h)
    Linv = np.linalg.solve(L, np.eye(n))
    Hinv = Linv.T @ Linv
    x = -Hinv @ f
    active, u = [], np.zeros(0)
    row_norm = np.maximum(np.linalg.norm(G, axis=1), 1e-300) if m else np.zeros(0)
    # per-row acceptance threshold, well inside the reporting tolerance
    thresh = 1e-2 * cfg.feas_tol * np.maximum(1.0, np.abs(h)) / row_norm if m else np.zeros(0)
    for it in range(1, cfg.qp_max_iter + 1):
        viol = (G @ x - h) / row_norm - thresh if m else np.zeros(0)
        viol[active] = -np.inf
        if m == 0 or np.max(viol) <= 0.0:
            mult = np.zeros(m)
            mult[active] = u
            return QpResult(QpStatus.OPTIMAL, x, p.objective(x), sorted(active), mult, iterations=it)
        q = int(np.argmax(viol))
        nq = G[q]
        uq = 0.0
        while True:
            N = G[active]
            if active:
                NHN = N @ Hinv @ N.T
                Nstar = np.linalg.solve(NHN, N @ Hinv)
                r = Nstar @ nq
                z = Hinv @ nq - Hinv @ N.T @ r
            else:
                r = np.zeros(0)
                z = Hinv @ nq
            curv = float(z @ nq)
            dependent = curv <= 1e-11 * float(nq @ Hinv @ nq)
            # largest dual step keeping the active multipliers nonnegative
            t1, k = np.inf, None
            for j in range(len(active)):
                if r[j] > 1e-14 and u[j] / r[j] < t1:
                    t1, k = u[j] / r[j], j
            slack = float(nq @ x - h[q])
            t2 = np.inf if dependent else slack / curv
            t = min(t1, t2)
            if not np.isfinite(t):
                return QpResult(QpStatus.INFEASIBLE, np.full(n, np.nan), np.inf,
                                certificate=_dual_certificate(G, h, q, active, r), iterations=it)
            if not dependent:
                x = x - t * z
            u = u - t * r
            uq += t
            if t == t2:
                active.append(q)
                u = np.append(u, uq)
                break
            active.pop(k)
            u = np.delete(u, k)
    return QpResult(QpStatus.MAX_ITERATIONS, x, p.objective(x), sorted(active), iterations=cfg.qp_max_iter)


def _dual_certificate(G, h, q, active, r):
    """Farkas vector for a violated row ``q`` spanned by active rows with
    ``g_q = sum r_j g_j``, ``r_j <= 0``: ``y_q = 1``, ``y_j = -r_j``."""
    y = np.zeros(len(h))
    y[q] = 1.0
    for j, rj in zip(active, r):
        y[j] = max(-rj, 0.0)
    return y


def _solve_qp_primal(p: QpProblem, cfg=DEFAULTS) -> QpResult:
    """Primal active-set method started from a phase-one feasible point."""
    H, f, G, h = p.hessian, p.linear, p.ineq_normals, p.ineq_offsets
    n, m = p.n, len(h)
    if n == 0:
        feas = bool(np.all(h >= -cfg.feas_tol))
        status = QpStatus.OPTIMAL if feas else QpStatus.INFEASIBLE
        return QpResult(status, np.zeros(0), p.constant if feas else np.inf,
                        certificate=None if feas else (h < -cfg.feas_tol).astype(float))
    if m == 0:
        x = np.linalg.lstsq(H, -f, rcond=None)[0]
        if np.max(np.abs(H @ x + f)) > cfg.kkt_tol * max(1.0, np.max(np.abs(f))):
            raise UnboundedQpError("objective unbounded below")
        return QpResult(QpStatus.OPTIMAL, x, p.objective(x), [], np.zeros(0))

    x, cert = _phase_one(G, h, cfg)
    if x is None:
        return QpResult(QpStatus.INFEASIBLE, np.full(n, np.nan), np.inf, certificate=cert)

    W = []
    lam = np.zeros(0)
    for it in range(1, cfg.qp_max_iter + 1):
        g = H @ x + f
        k = len(W)
        Gw = G[W]
        KKT = np.block([[H, Gw.T], [Gw, np.zeros((k, k))]])
        rhs = np.concatenate((-g, np.zeros(k)))
        sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
        step, lam = sol[:n], sol[n:]
        if np.max(np.abs(KKT @ sol - rhs)) > 1e-8 * max(1.0, np.max(np.abs(rhs))):
            # singular KKT: follow a zero-curvature descent direction
            step = _null_descent(H, Gw, g)
            if step is None:
                raise UnboundedQpError("KKT system inconsistent")
            lam = None
        scale_x = max(1.0, np.max(np.abs(x)))
        if lam is not None and np.max(np.abs(step)) <= 1e-12 * scale_x:
            if k == 0 or lam.min() >= -1e-10:
                x_fin = x
                mult = np.zeros(m)
                mult[W] = lam
                return QpResult(QpStatus.OPTIMAL, x_fin, p.objective(x_fin), sorted(W), mult, iterations=it)
            W.pop(int(np.argmin(lam)))
            continue
        Gp = G @ step
        slack = h - G @ x
        alpha, block = 1.0 if lam is not None else np.inf, None
        for i in range(m):
            if i in W or Gp[i] <= 1e-14:
                continue
            a = max(slack[i], 0.0) / Gp[i]
            if a < alpha:
                alpha, block = a, i
        if not np.isfinite(alpha):
            raise UnboundedQpError("objective unbounded below along a feasible ray")
        x = x + alpha * step
        if block is not None:
            W.append(block)
    return QpResult(QpStatus.MAX_ITERATIONS, x, p.objective(x), sorted(W), iterations=cfg.qp_max_iter)


def _null_descent(H, Gw, g):
    """Descent direction of zero curvature within the working-set null space."""
    n = H.shape[0]
    if len(Gw):
        _, s, Vt = np.linalg.svd(Gw)
        rank = int(np.sum(s > 1e-10))
        Z = Vt[rank:].T
    else:
        Z = np.eye(n)
    if Z.shape[1] == 0:
        return None
    Hz = Z.T @ H @ Z
    w, U = np.linalg.eigh(Hz)
    null = U[:, w <= 1e-10]
    if null.shape[1] == 0:
        return None
    d = -(Z @ null) @ (null.T @ (Z.T @ g))
    if np.max(np.abs(d)) <= 1e-14:
        return None
    return d


def kkt_residual(p: QpProblem, r: QpResult):
    """Stationarity residual ``|Hx + f + G'lambda|_inf`` of an optimal result."""
    mult = np.zeros(len(p.ineq_offsets)) if r.multipliers is None else r.multipliers
    g = p.hessian @ r.solution + p.linear + p.ineq_normals.T @ mult
    return float(np.max(np.abs(g), initial=0.0))
