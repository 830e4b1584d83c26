"""The optimal control problem solved at every step.

The problem is mixed-integer only through the transmission schedule.  For a
fixed schedule the bucket trajectory is determined, so schedules are
enumerated, filtered on the bucket and one condensed convex QP is solved per
survivor.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import polytope as pt
from .invariant_sets import ActuatorKind, FeedbackDesign, ObserverDesign
from .numerics import QpProblem, QpStatus, solve_qp
from .polytope import Polytope
from .system import NcsInput, NcsState, NetworkSpec, PlantModel
from .terminal import TerminalDesign


class DesignInfeasibleError(RuntimeError):
    """A tightened set or terminal set is empty."""


class OcpInfeasibleError(RuntimeError):
    """No admissible schedule yields a feasible QP."""


# ---------------------------------------------------------------------------
# configuration and sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OcpConfig:
    N_bar: int
    M: int
    H: int
    S: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "S", np.atleast_2d(np.asarray(self.S, dtype=float)))
        if not self.N_bar >= self.H >= self.M >= 1:
            raise ValueError(f"need N_bar >= H >= M >= 1, got {self.N_bar}, {self.H}, {self.M}")
        if np.linalg.eigvalsh(0.5 * (self.S + self.S.T))[0] <= 0:
            raise ValueError("S must be positive definite")

    def check_weights(self, R):
        """``R - S`` must be positive semidefinite."""
        if np.linalg.eigvalsh(np.atleast_2d(R) - self.S)[0] < -1e-12:
            raise ValueError("need R >= S")


@dataclass
class TightenedSets:
    Xhat_p: Polytope
    Xbar_p: Polytope
    Ubar_p: Polytope


def horizon(k, cfg: OcpConfig):
    """Cyclic horizon ``N_bar - (k mod M)``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return cfg.N_bar - (k % cfg.M)


def tighten(plant: PlantModel, Psi_p, Omega_p, KOmega_p) -> TightenedSets:
    Xhat = pt.pontryagin_diff(plant.X, Psi_p)
    Xbar = pt.pontryagin_diff(Xhat, Omega_p)
    Ubar = pt.pontryagin_diff(plant.U, KOmega_p)
    for name, S in (("X - Psi", Xhat), ("X - Omega - Psi", Xbar), ("U - K Omega", Ubar)):
        if S.is_empty or not S.contains_point(np.zeros(S.dim)):
            raise DesignInfeasibleError(f"tightened set {name} is empty or excludes the origin")
    return TightenedSets(Xhat, Xbar, Ubar)


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    bits: tuple

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("schedule bits must be 0 or 1")

    def __len__(self):
        return len(self.bits)

    def __str__(self):
        return "".join(map(str, self.bits))

    @property
    def transmissions(self):
        return [i for i, b in enumerate(self.bits) if b]

    @property
    def count(self):
        return sum(self.bits)

    @property
    def word(self):
        """Binary value of the word read left to right."""
        return int(str(self), 2) if self.bits else 0


def in_gamma(bits, H, s):
    """Definitional membership test for the schedule set ``Gamma_N^H(s)``."""
    N = len(bits)
    if N <= H - s - 1:
        return True
    tau = [i for i, b in enumerate(bits) if b]
    if not tau:
        return False
    if tau[0] > H - s - 1:
        return False
    if any(b - a > H for a, b in zip(tau, tau[1:])):
        return False
    return N - tau[-1] <= H - 1


def enumerate_schedules(N, H, s):
    """All members of ``Gamma_N^H(s)`` by depth-first generation.

    Branches whose current run of zeros already rules out the gap bounds are
    pruned.  Output is in increasing binary order.
    """
    if N < 1 or H < 1 or s < 0:
        raise ValueError("need N >= 1, H >= 1, s >= 0")
    if N <= H - s - 1:
        return [Schedule(b) for b in _all_words(N)]
    out = []
    first_limit = H - s - 1

    def rec(prefix, last):
        i = len(prefix)
        if i == N:
            if last is not None and N - last <= H - 1:
                out.append(Schedule(prefix))
            return
        # a zero at position i is allowed if a later one can still satisfy the gap bound
        if last is None:
            zero_ok = i + 1 <= first_limit
        else:
            zero_ok = (i + 1) - last <= H
        if zero_ok:
            rec(prefix + [0], last)
        one_ok = i <= first_limit if last is None else i - last <= H
        if one_ok:
            rec(prefix + [1], i)

    rec([], None)
    return out


def _all_words(N):
    return [tuple((w >> (N - 1 - i)) & 1 for i in range(N)) for w in range(2 ** N)]


def brute_force_schedules(N, H, s):
    return [Schedule(b) for b in _all_words(N) if in_gamma(b, H, s)]


def bucket_levels(schedule, beta0, net: NetworkSpec):
    """Bucket levels along the schedule (untruncated sign, capped at ``b``)."""
    levels = [beta0]
    beta = beta0
    for g in schedule.bits:
        beta = min(beta + net.g - g * net.c, net.b)
        levels.append(beta)
        if beta < 0:
            break
    return levels


def bucket_feasible(schedule, beta0, net: NetworkSpec, terminal=True):
    levels = bucket_levels(schedule, beta0, net)
    if min(levels) < 0 or len(levels) != len(schedule) + 1:
        return False
    return not terminal or levels[-1] >= net.c - net.g


# ---------------------------------------------------------------------------
# condensed QP
# ---------------------------------------------------------------------------

@dataclass
class CondensedQp:
    """QP for one schedule plus the affine maps from decisions to trajectories.

    ``Sx[i] @ z + sx[i]`` is ``xbar_p(i)`` and ``Su[i] @ z + su[i]`` the held
    input ``ubar_s(i)`` for ``i = 0..N``; ``Sc[t] @ z + sc[t]`` is the update
    at transmission index ``t``.
    """

    problem: QpProblem
    schedule: Schedule
    Sx: list
    sx: list
    Su: list
    su: list
    Sc: dict
    sc: dict
    betas: list
    const_violation: float = 0.0

    def decode(self, z):
        xs, us = [], []
        N = len(self.schedule)
        for i in range(N + 1):
            xs.append(NcsState(self.Sx[i] @ z + self.sx[i], self.Su[i] @ z + self.su[i], self.betas[i]))
        m = len(self.su[0])
        for i, g in enumerate(self.schedule.bits):
            u_c = self.Sc[i] @ z + self.sc[i] if g else np.zeros(m)
            us.append(NcsInput(u_c, g, np.zeros(m)))
        return xs, us


class _Rows:
    """Accumulator for affine inequality rows ``G z <= h`` and constant checks."""

    def __init__(self, nz):
        self.nz = nz
        self.G, self.h = [], []
        self.worst_const = np.inf

    def add(self, P: Polytope, Sz, s0):
        """Constraint ``Sz z + s0 in P``."""
        G = P.A @ Sz
        h = P.b - P.A @ s0
        if self.nz == 0 or np.max(np.abs(G), initial=0.0) == 0.0:
            self.worst_const = min(self.worst_const, float(np.min(h, initial=np.inf)))
            return
        self.G.append(G)
        self.h.append(h)

    def arrays(self):
        if not self.G:
            return np.zeros((0, self.nz)), np.zeros(0)
        return np.vstack(self.G), np.concatenate(self.h)


def build_qp(schedule: Schedule, xhat: NcsState, xbar_prev: NcsState, plant: PlantModel,
             kind: ActuatorKind, feedback: FeedbackDesign, tightened: TightenedSets,
             terminal: TerminalDesign, cfg: OcpConfig, net: NetworkSpec) -> CondensedQp:
    """Condensed QP for a fixed schedule.

    Decisions are ``xbar_p(0)`` and, for the ZOH actuator, ``ubar_s(0)`` when
    the schedule transmits at index 0, followed by one update per
    transmission index.
    """
    n, m = plant.n, plant.m
    A, B = plant.A, plant.B
    bits = schedule.bits
    N = len(bits)
    g0 = N > 0 and bits[0] == 1
    free_us0 = g0 and kind is ActuatorKind.ZOH
    tx = [i for i, b in enumerate(bits) if b]
    nz = (n if g0 else 0) + (m if free_us0 else 0) + m * len(tx)

    # initial nominal state
    if g0:
        Sx0 = np.zeros((n, nz))
        Sx0[:, :n] = np.eye(n)
        sx0 = np.zeros(n)
        Su0 = np.zeros((m, nz))
        if free_us0:
            Su0[:, n:n + m] = np.eye(m)
            su0 = np.zeros(m)
        else:
            su0 = xhat.u_s.copy()
    else:
        Sx0, sx0 = np.zeros((n, nz)), xbar_prev.x_p.copy()
        Su0, su0 = np.zeros((m, nz)), xbar_prev.u_s.copy()
    offset = (n if g0 else 0) + (m if free_us0 else 0)
    Sc, sc = {}, {}
    for j, t in enumerate(tx):
        M_ = np.zeros((m, nz))
        M_[:, offset + j * m: offset + (j + 1) * m] = np.eye(m)
        Sc[t], sc[t] = M_, np.zeros(m)

    Sx, sx, Su, su = [Sx0], [sx0], [Su0], [su0]
    for i in range(N):
        if bits[i]:
            Sa, sa = Sc[i], sc[i]
        else:
            Sa, sa = Su[i], su[i]
        Sx.append(A @ Sx[i] + B @ Sa)
        sx.append(A @ sx[i] + B @ sa)
        Su.append(Sa)
        su.append(sa)

    beta0 = xhat.beta
    betas = [beta0]
    for b in bits:
        betas.append(min(betas[-1] + net.g - b * net.c, net.b))

    rows = _Rows(nz)
    if g0:
        # xhat - xbar(0) in Omega
        rows.add(feedback.Omega_p, -Sx0, xhat.x_p - sx0)
        if free_us0:
            rows.add(feedback.KOmega_p, -Su0, xhat.u_s - su0)
    for i in range(N):
        rows.add(tightened.Xbar_p, Sx[i], sx[i])
        rows.add(tightened.Ubar_p, Su[i], su[i])
        if bits[i]:
            rows.add(tightened.Ubar_p, Sc[i], sc[i])
    rows.add(terminal.Xf_p, Sx[N], sx[N])
    rows.add(tightened.Ubar_p, Su[N], su[N])
    G, h = rows.arrays()

    # cost: lambda term + stage costs + terminal cost
    Hs = np.zeros((nz, nz))
    f = np.zeros(nz)
    c = 0.0

    def quad(W, Sz, s0, weight=1.0):
        nonlocal Hs, f, c
        WS = W @ Sz
        Hs += 2.0 * weight * Sz.T @ WS
        f += 2.0 * weight * Sz.T @ (W @ s0)
        c += weight * float(s0 @ W @ s0)

    quad(cfg.S, Su0, su0)
    for i in range(N):
        quad(plant.Q, Sx[i], sx[i])
        if bits[i]:
            quad(plant.R, Sc[i], sc[i])
        else:
            quad(plant.R, Su[i], su[i])
    quad(terminal.P_f, Sx[N], sx[N])
    problem = QpProblem(0.5 * (Hs + Hs.T), f, G, h, constant=c)
    return CondensedQp(problem, schedule, Sx, sx, Su, su, Sc, sc, betas,
                       const_violation=min(0.0, rows.worst_const))


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

@dataclass
class OcpSolution:
    schedule: Schedule
    xbar_traj: list
    ubar_traj: list
    value: float
    N: int
    per_schedule_log: list = field(default_factory=list)
    decision: np.ndarray = None


@dataclass
class OcpContext:
    """Everything the OCP needs besides the time-varying state."""

    plant: PlantModel
    net: NetworkSpec
    kind: ActuatorKind
    observer: ObserverDesign
    feedback: FeedbackDesign
    tightened: TightenedSets
    terminal: TerminalDesign
    cfg: OcpConfig


def candidate_schedules(N, s, k, ctx: OcpContext, beta):
    scheds = enumerate_schedules(N, ctx.cfg.H, s)
    if k == 0:
        scheds = [sc for sc in scheds if sc.bits[0] == 1]
    return [sc for sc in scheds if bucket_feasible(sc, beta, ctx.net, terminal=True)]


def solve_schedule(schedule, xhat, xbar, ctx: OcpContext, feas_tol=1e-8):
    """Solve the QP of one schedule; returns ``(status, value, qp, result)``."""
    qp = build_qp(schedule, xhat, xbar, ctx.plant, ctx.kind, ctx.feedback, ctx.tightened,
                  ctx.terminal, ctx.cfg, ctx.net)
    if qp.const_violation < -feas_tol:
        return QpStatus.INFEASIBLE, np.inf, qp, None
    res = solve_qp(qp.problem)
    return res.status, res.value, qp, res


def solve_ocp(xhat: NcsState, xbar: NcsState, s, k, ctx: OcpContext, tie_tol=1e-9) -> OcpSolution:
    """Minimum over admissible schedules of the per-schedule QP values.

    Ties within ``tie_tol`` go to fewer transmissions, then to the smaller
    binary word.  Raises :class:`OcpInfeasibleError` if nothing is feasible.
    """
    N = horizon(k, ctx.cfg)
    scheds = candidate_schedules(N, s, k, ctx, xhat.beta)
    log, best = [], None
    for sc in scheds:
        status, value, qp, res = solve_schedule(sc, xhat, xbar, ctx)
        log.append((sc, status, value))
        if status is not QpStatus.OPTIMAL:
            continue
        key = (value, sc.count, sc.word)
        if best is None or _better(key, best[0], tie_tol):
            best = (key, qp, res)
    if best is None:
        raise OcpInfeasibleError(f"OCP infeasible at k={k} (s={s}, N={N}, {len(scheds)} schedules tried)")
    _, qp, res = best
    xs, us = qp.decode(res.solution)
    return OcpSolution(qp.schedule, xs, us, res.value, N, log, res.solution)


def _better(key, ref, tol):
    if key[0] < ref[0] - tol:
        return True
    if key[0] > ref[0] + tol:
        return False
    return key[1:] < ref[1:]


def check_solution(sol: OcpSolution, xhat: NcsState, xbar: NcsState, ctx: OcpContext, s=None, tol=1e-8):
    """Independent re-check of a returned solution.

    Re-simulates the nominal dynamics from the decoded initial state and
    tests every constraint directly.  Returns the worst violation (``<= 0``
    means all constraints hold within ``tol``) and the dynamics residual.
    """
    plant, net, fb, ts = ctx.plant, ctx.net, ctx.feedback, ctx.tightened
    xs, us = sol.xbar_traj, sol.ubar_traj
    N = len(us)
    resid = 0.0
    worst = -np.inf
    x = xs[0]
    for i in range(N):
        u = us[i]
        u_app = u.u_c if u.gamma else x.u_s
        x_next = plant.A @ x.x_p + plant.B @ u_app
        resid = max(resid, float(np.max(np.abs(x_next - xs[i + 1].x_p))),
                    float(np.max(np.abs(u_app - xs[i + 1].u_s))))
        worst = max(worst, _viol(ts.Xbar_p, x.x_p), _viol(ts.Ubar_p, x.u_s))
        if u.gamma:
            worst = max(worst, _viol(ts.Ubar_p, u.u_c))
        x = xs[i + 1]
    worst = max(worst, _viol(ctx.terminal.Xf_p, xs[N].x_p), _viol(ts.Ubar_p, xs[N].u_s))
    bits = sol.schedule.bits
    if bits and bits[0]:
        worst = max(worst, _viol(fb.Omega_p, xhat.x_p - xs[0].x_p))
        if ctx.kind is ActuatorKind.ZOH:
            worst = max(worst, _viol(fb.KOmega_p, xhat.u_s - xs[0].u_s))
        else:
            worst = max(worst, float(np.max(np.abs(xhat.u_s - xs[0].u_s))) - tol)
    else:
        worst = max(worst, float(np.max(np.abs(xs[0].x_p - xbar.x_p))) - tol,
                    float(np.max(np.abs(xs[0].u_s - xbar.u_s))) - tol)
    if not bucket_feasible(sol.schedule, xhat.beta, net, terminal=True):
        worst = max(worst, 1.0)
    if s is not None and not in_gamma(bits, ctx.cfg.H, s):
        worst = max(worst, 1.0)
    return worst, resid


def _viol(P: Polytope, x):
    return float(np.max(P.A @ x - P.b))
