"""Closed-loop simulation of the robust rollout controller.

Per step: solve the OCP, fix the nominal state to the optimized initial
state, apply the transmitted update (or not) together with the local error
feedback, then advance the real plant, the observer, the auxiliary predictor
and the nominal system.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np

from . import polytope as pt
from .invariant_sets import ActuatorKind, error_feedback
from .ocp import OcpContext, OcpInfeasibleError, solve_ocp
from .system import (MembershipViolation, NcsInput, NcsState, ncs_step, nominal_step,
                     observer_step, plant_input, plant_output)


class PropertyFailure(RuntimeError):
    """Strict-mode abort: constraint violation or infeasible OCP."""


class DisturbanceKind(enum.Enum):
    ZERO = "zero"
    EXTREMAL_FIXED = "extremal_fixed"
    EXTREMAL_SWITCHING = "extremal_switching"
    UNIFORM_RANDOM = "uniform"


@dataclass(frozen=True)
class DisturbanceMode:
    kind: DisturbanceKind = DisturbanceKind.EXTREMAL_FIXED
    seed: int = 0

    @classmethod
    def parse(cls, text, seed=0):
        if isinstance(text, cls):
            return text
        text = str(text).strip().lower()
        if ":" in text:
            text, seed = text.split(":", 1)
            seed = int(seed)
        return cls(DisturbanceKind(text), int(seed))

    def __str__(self):
        if self.kind is DisturbanceKind.UNIFORM_RANDOM:
            return f"uniform:{self.seed}"
        return self.kind.value


def _upper_vertex(P, sign=1.0):
    V = P.V
    return V[int(np.argmax(sign * V.sum(axis=1)))].copy()


def _uniform_in(P, rng, max_tries=10_000):
    V = P.V
    lo, hi = V.min(axis=0), V.max(axis=0)
    flat = hi - lo <= 0
    for _ in range(max_tries):
        x = np.where(flat, lo, rng.uniform(lo, np.where(flat, lo + 1.0, hi)))
        if P.contains_point(x):
            return x
    raise RuntimeError("rejection sampling failed")


def sample_uncertainty(mode: DisturbanceMode, k, W_p, V_p, rng):
    """Disturbance and measurement-noise sample ``(w_p, v_p)`` at step ``k``."""
    if mode.kind is DisturbanceKind.ZERO:
        return np.zeros(W_p.dim), np.zeros(V_p.dim)
    if mode.kind is DisturbanceKind.EXTREMAL_FIXED:
        return _upper_vertex(W_p), _upper_vertex(V_p)
    if mode.kind is DisturbanceKind.EXTREMAL_SWITCHING:
        sgn = 1.0 if k % 2 == 0 else -1.0
        return _upper_vertex(W_p, sgn), _upper_vertex(V_p, sgn)
    return _uniform_in(W_p, rng), _uniform_in(V_p, rng)


@dataclass
class SimConfig:
    steps: int = 51
    disturbance: DisturbanceMode = field(default_factory=DisturbanceMode)
    x_p0: np.ndarray = None
    u_s0: np.ndarray = None
    xhat0: np.ndarray = None
    strict: bool = True
    # fault injection: multiply the disturbance by this factor at this step
    fault_step: int = None
    fault_scale: float = 1.0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        self.disturbance = DisturbanceMode.parse(self.disturbance)


@dataclass
class SimTrace:
    kind: ActuatorKind
    x: list = field(default_factory=list)
    xhat: list = field(default_factory=list)
    xtilde: list = field(default_factory=list)
    xbar: list = field(default_factory=list)
    u: list = field(default_factory=list)
    schedule: list = field(default_factory=list)
    s: list = field(default_factory=list)
    N: list = field(default_factory=list)
    ocp_value: list = field(default_factory=list)
    feasible: list = field(default_factory=list)
    w: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @property
    def steps(self):
        return len(self.u)

    @property
    def gammas(self):
        return [u.gamma for u in self.u]

    @property
    def transmissions(self):
        return sum(self.gammas)

    def max_gap(self):
        """Longest run between transmissions (and from the last one to the end)."""
        tx = [k for k, g in enumerate(self.gammas) if g]
        if not tx:
            return self.steps
        gaps = [b - a for a, b in zip(tx, tx[1:])]
        gaps.append(self.steps - tx[-1])
        return max(gaps)

    def to_csv(self, path_or_buf=None):
        """Write the trace; returns the text when no target is given."""
        n = len(self.x[0].x_p)
        m = len(self.x[0].u_s)
        header = (["k"] + [f"x_p{i}" for i in range(n)] + [f"u_s{i}" for i in range(m)] + ["beta"]
                  + [f"xhat_p{i}" for i in range(n)] + [f"xbar_p{i}" for i in range(n)]
                  + [f"xtilde_p{i}" for i in range(n)] + [f"u_c{i}" for i in range(m)] + ["gamma"]
                  + [f"u_e{i}" for i in range(m)] + ["s", "N", "ocp_value", "feasible"])
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(header)
        fmt = _fmt
        for k in range(len(self.x)):
            x = self.x[k]
            row = [k] + [fmt(a) for a in x.x_p] + [fmt(a) for a in x.u_s] + [x.beta]
            row += [fmt(a) for a in self.xhat[k].x_p] + [fmt(a) for a in self.xbar[k].x_p]
            row += [fmt(a) for a in self.xtilde[k].x_p]
            if k < self.steps:
                u = self.u[k]
                row += [fmt(a) for a in u.u_c] + [u.gamma] + [fmt(a) for a in u.u_e]
                row += [self.s[k], self.N[k], fmt(self.ocp_value[k]), int(self.feasible[k])]
            else:
                row += [""] * (2 * m + 5)
            wr.writerow(row)
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(a):
    return "%.17g" % float(a)


def initial_states(ctx: OcpContext, sim: SimConfig, net):
    """Real, observer and nominal initial states per the algorithm's step 0.

    ``x(0) - xhat(0)`` is clipped into ``Psi_p`` by a radial scaling when the
    supplied estimate is too far off; ``xbar(0) = xhat(0)``.
    """
    plant = ctx.plant
    x_p0 = np.zeros(plant.n) if sim.x_p0 is None else np.asarray(sim.x_p0, dtype=float).reshape(plant.n)
    u_s0 = np.zeros(plant.m) if sim.u_s0 is None else np.asarray(sim.u_s0, dtype=float).reshape(plant.m)
    xhat_p0 = x_p0.copy() if sim.xhat0 is None else np.asarray(sim.xhat0, dtype=float).reshape(plant.n)
    d = x_p0 - xhat_p0
    Psi = ctx.observer.Psi_p
    if not Psi.contains_point(d):
        t = pt.is_subset_scaling(pt.Polytope.point(d), Psi) if np.min(Psi.b) > 0 else np.inf
        xhat_p0 = x_p0 - (d / t if np.isfinite(t) else 0.0 * d)
    x = NcsState(x_p0, u_s0, net.beta0)
    xhat = NcsState(xhat_p0, u_s0, net.beta0)
    return x, xhat, xhat.copy()


def run_closed_loop(ctx: OcpContext, sim: SimConfig) -> SimTrace:
    plant, net, kind = ctx.plant, ctx.net, ctx.kind
    K_p = ctx.feedback.K_p
    L_p = ctx.observer.L_p
    rng = np.random.default_rng(sim.disturbance.seed)
    x, xhat, xbar = initial_states(ctx, sim, net)
    xtilde = xhat.copy()
    s = 0
    tr = SimTrace(kind)
    tr.x.append(x.copy())
    tr.xhat.append(xhat.copy())
    for k in range(sim.steps):
        try:
            sol = solve_ocp(xhat, xbar, s, k, ctx)
            nu = sol.ubar_traj[0]
            xbar = sol.xbar_traj[0]
            tr.ocp_value.append(sol.value)
            tr.schedule.append(str(sol.schedule))
            tr.N.append(sol.N)
            tr.feasible.append(True)
        except OcpInfeasibleError:
            if sim.strict:
                raise PropertyFailure(f"OCP infeasible at k={k}")
            # fall back on holding; the tube guarantee is lost from here on
            nu = NcsInput(np.zeros(plant.m), 0, np.zeros(plant.m))
            tr.ocp_value.append(np.nan)
            tr.schedule.append("")
            tr.N.append(0)
            tr.feasible.append(False)
        gamma = nu.gamma
        if gamma:
            xtilde = xhat.copy()
        u_c, u_e = error_feedback(kind, gamma, nu.u_c, xhat.x_p, xtilde.x_p, xbar.x_p, K_p)
        u = NcsInput(u_c, gamma, u_e)
        tr.xbar.append(xbar.copy())
        tr.xtilde.append(xtilde.copy())
        tr.u.append(u)
        tr.s.append(s)

        w, v = sample_uncertainty(sim.disturbance, k, plant.W, plant.V, rng)
        if sim.fault_step is not None and k == sim.fault_step:
            w = sim.fault_scale * w
        strict_w = sim.strict and sim.fault_step is None
        try:
            y = plant_output(x.x_p, v, plant, strict=strict_w)
            u_p = plant_input(x, u)
            x_next = ncs_step(x, u, w, plant, net, strict=strict_w, k=k)
        except MembershipViolation as e:
            raise PropertyFailure(str(e)) from e
        xhat_next = NcsState(observer_step(xhat.x_p, u_p, y, L_p, plant),
                             (1 - gamma) * xhat.u_s + gamma * u_c, x_next.beta)
        xtilde = nominal_step(xtilde, u, plant, net)
        xbar = nominal_step(xbar, nu, plant, net)
        x, xhat = x_next, xhat_next
        s = 0 if gamma else s + 1
        tr.w.append(w)
        tr.v.append(v)
        tr.x.append(x.copy())
        tr.xhat.append(xhat.copy())
        if sim.strict:
            bad = _step_violation(plant, x, u_p)
            if bad:
                raise PropertyFailure(f"constraint violation after step {k}: {bad}")
    tr.xbar.append(xbar.copy())
    tr.xtilde.append(xtilde.copy())
    return tr


def _step_violation(plant, x, u_p):
    if not plant.X.contains_point(x.x_p):
        return f"x_p={x.x_p} outside X"
    if not plant.U.contains_point(u_p):
        return f"u_p={u_p} outside U"
    return ""


# ---------------------------------------------------------------------------
# property checks
# ---------------------------------------------------------------------------

@dataclass
class PropertyReport:
    checks: dict = field(default_factory=dict)   # name -> (passed, margin)

    def add(self, name, passed, margin=np.nan):
        self.checks[name] = (bool(passed), float(margin))

    @property
    def passed(self):
        return all(p for p, _ in self.checks.values())

    def failures(self):
        return [k for k, (p, _) in self.checks.items() if not p]

    def lines(self):
        return [f"{'PASS' if p else 'FAIL'}  {name:<22s} margin {m: .3e}" for name, (p, m) in self.checks.items()]


def _margin(P, x):
    return float(np.min(P.b - P.A @ x))


def check_trace(trace: SimTrace, ctx: OcpContext, eps_conv=1e-3, window=10, tol=1e-9) -> PropertyReport:
    plant, net, fb, obs = ctx.plant, ctx.net, ctx.feedback, ctx.observer
    rep = PropertyReport()
    K = trace.steps
    rep.add("feasible", all(trace.feasible), float(sum(trace.feasible) - K))

    mx = min(_margin(plant.X, x.x_p) for x in trace.x)
    rep.add("state_constraints", mx >= -tol, mx)
    ups = [plant_input(trace.x[k], trace.u[k]) for k in range(K)]
    mu = min(_margin(plant.U, u) for u in ups)
    rep.add("input_constraints", mu >= -tol, mu)
    betas = [x.beta for x in trace.x]
    mb = min(min(betas), net.b - max(betas))
    rep.add("bucket", mb >= 0, mb)

    tube = pt.minkowski_sum(fb.Omega_p, obs.Psi_p)
    zoh = ctx.kind is ActuatorKind.ZOH
    m_obs, m_real = np.inf, np.inf
    for k in range(K + 1):
        xb = trace.xbar[k]
        m_obs = min(m_obs, _margin(fb.Omega_p, trace.xhat[k].x_p - xb.x_p))
        m_real = min(m_real, _margin(tube, trace.x[k].x_p - xb.x_p))
        du = trace.x[k].u_s - xb.u_s
        if zoh:
            mk = _margin(fb.KOmega_p, du)
        else:
            mk = -float(np.max(np.abs(du)))
        m_obs, m_real = min(m_obs, mk), min(m_real, mk)
    rep.add("tube_observer", m_obs >= -tol, m_obs)
    rep.add("tube_real", m_real >= -tol, m_real)

    H = ctx.cfg.H
    g = trace.gammas
    win = min(sum(g[k:k + H]) for k in range(0, K - H + 1)) if K >= H else 1
    rep.add("transmission_gap", trace.max_gap() <= H and win >= 1, H - trace.max_gap())

    last = -1
    ok = True
    for k in range(K):
        ok &= trace.s[k] == k - last - 1
        if g[k]:
            last = k
    rep.add("counter", ok, 0.0)
    sim_ok = all(np.array_equal(trace.xhat[k].u_s, trace.x[k].u_s) and trace.xhat[k].beta == trace.x[k].beta
                 for k in range(K + 1))
    rep.add("observer_simulators", sim_ok, 0.0)

    tail = range(max(0, K + 1 - window), K + 1)
    nb = max(float(np.linalg.norm(trace.xbar[k].x_p)) for k in tail)
    rep.add("nominal_convergence", nb <= eps_conv, eps_conv - nb)
    mt = min(_margin(tube, trace.x[k].x_p) for k in tail)
    rep.add("final_tube", mt >= -tol, mt)
    return rep
