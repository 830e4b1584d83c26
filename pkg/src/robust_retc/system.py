"""Networked control system model: LTI plant, token bucket, actuator hold and
Luenberger observer."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .polytope import Polytope


class TokenBucketViolation(RuntimeError):
    """A transmission was requested without enough tokens."""


class MembershipViolation(RuntimeError):
    """A disturbance or noise sample left its bounding set in strict mode."""


def _uncontrollable_modes(A, B):
    """Eigenvalues ``|z| >= 1`` failing the PBH rank test for ``(A, B)``."""
    n = A.shape[0]
    bad = []
    for z in np.linalg.eigvals(A):
        if abs(z) < 1.0 - 1e-12:
            continue
        M = np.hstack((z * np.eye(n) - A, B))
        if np.linalg.matrix_rank(M, tol=1e-9) < n:
            bad.append(z)
    return bad


def is_stabilizable(A, B):
    return not _uncontrollable_modes(np.atleast_2d(A), np.atleast_2d(B))


def is_detectable(A, C):
    return not _uncontrollable_modes(np.atleast_2d(A).T, np.atleast_2d(C).T)


def is_controllable(A, B):
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.linalg.matrix_rank(np.hstack(blocks), tol=1e-9) == n


@dataclass
class PlantModel:
    """Perturbed LTI plant ``x+ = A x + B u + w``, ``y = C x + v`` with
    constraint sets, uncertainty sets and quadratic stage weights."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    X: Polytope
    U: Polytope
    W: Polytope
    V: Polytope
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = self.A.shape[0]
        self.B = np.asarray(self.B, dtype=float).reshape(n, -1)
        self.C = np.asarray(self.C, dtype=float).reshape(-1, n)
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        m, q = self.B.shape[1], self.C.shape[0]
        for name, S, d in (("X", self.X, n), ("U", self.U, m), ("W", self.W, n), ("V", self.V, q)):
            if S.dim != d:
                raise ValueError(f"set {name} has dim {S.dim}, expected {d}")
            if not S.is_c_set:
                raise ValueError(f"set {name} must be nonempty and contain the origin")
        for name, M in (("Q", self.Q), ("R", self.R)):
            if np.linalg.eigvalsh(0.5 * (M + M.T))[0] <= 0:
                raise ValueError(f"{name} must be positive definite")
        if not is_stabilizable(self.A, self.B):
            raise ValueError("(A, B) is not stabilizable")
        if not is_detectable(self.A, self.C):
            raise ValueError("(A, C) is not detectable")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def q(self):
        return self.C.shape[0]


@dataclass(frozen=True)
class NetworkSpec:
    """Token bucket: gain ``g`` per step, cost ``c`` per transmission, capacity ``b``."""

    g: int
    c: int
    b: int
    beta0: int

    def __post_init__(self):
        for k in ("g", "c", "b", "beta0"):
            if int(getattr(self, k)) != getattr(self, k):
                raise ValueError(f"{k} must be an integer")
        if self.g < 1:
            raise ValueError("token gain g must be >= 1")
        if not self.g <= self.c <= self.b:
            raise ValueError("need g <= c <= b")
        if not 0 <= self.beta0 <= self.b:
            raise ValueError("beta0 must lie in [0, b]")
        if self.beta0 < self.c - self.g:
            raise ValueError("beta0 >= c - g is required to transmit at k = 0")

    @property
    def M(self):
        """Base period ``ceil(c / g)``."""
        return math.ceil(self.c / self.g)


@dataclass
class NcsState:
    x_p: np.ndarray
    u_s: np.ndarray
    beta: int

    def __post_init__(self):
        self.x_p = np.asarray(self.x_p, dtype=float).reshape(-1)
        self.u_s = np.asarray(self.u_s, dtype=float).reshape(-1)
        self.beta = int(self.beta)

    def copy(self):
        return NcsState(self.x_p.copy(), self.u_s.copy(), self.beta)


@dataclass
class NcsInput:
    u_c: np.ndarray
    gamma: int
    u_e: np.ndarray

    def __post_init__(self):
        self.u_c = np.asarray(self.u_c, dtype=float).reshape(-1)
        self.u_e = np.asarray(self.u_e, dtype=float).reshape(-1)
        if self.gamma not in (0, 1):
            raise ValueError("gamma must be 0 or 1")
        self.gamma = int(self.gamma)


def token_bucket_step(beta, gamma, net: NetworkSpec, k=None):
    """``min(beta + g - gamma c, b)``; a transmission must leave ``beta >= 0``."""
    nxt = beta + net.g - gamma * net.c
    if nxt < 0:
        where = "" if k is None else f" at step {k}"
        raise TokenBucketViolation(
            f"transmission{where} needs {net.c} tokens, bucket holds {beta} (+{net.g})")
    return min(nxt, net.b)


def plant_input(x: NcsState, u: NcsInput):
    return (1 - u.gamma) * x.u_s + u.gamma * u.u_c + u.u_e


def ncs_step(x: NcsState, u: NcsInput, w_p, plant: PlantModel, net: NetworkSpec,
             strict=True, k=None):
    """Overall NCS update ``x+ = f(x, u) + w``."""
    w_p = np.asarray(w_p, dtype=float).reshape(plant.n)
    if strict and not plant.W.contains_point(w_p):
        raise MembershipViolation(f"disturbance {w_p} outside W" + ("" if k is None else f" at step {k}"))
    u_p = plant_input(x, u)
    x_next = plant.A @ x.x_p + plant.B @ u_p + w_p
    u_s_next = (1 - u.gamma) * x.u_s + u.gamma * u.u_c
    beta_next = token_bucket_step(x.beta, u.gamma, net, k)
    return NcsState(x_next, u_s_next, beta_next)


def nominal_step(x: NcsState, u: NcsInput, plant: PlantModel, net: NetworkSpec):
    return ncs_step(x, u, np.zeros(plant.n), plant, net, strict=False)


def observer_step(xhat_p, u_p, y_p, L_p, plant: PlantModel):
    """Luenberger update ``A xhat + B u + L (y - C xhat)``."""
    xhat_p = np.asarray(xhat_p, dtype=float).reshape(plant.n)
    u_p = np.asarray(u_p, dtype=float).reshape(plant.m)
    y_p = np.asarray(y_p, dtype=float).reshape(plant.q)
    L_p = np.asarray(L_p, dtype=float).reshape(plant.n, plant.q)
    return plant.A @ xhat_p + plant.B @ u_p + L_p @ (y_p - plant.C @ xhat_p)


def plant_output(x_p, v_p, plant: PlantModel, strict=True):
    v_p = np.asarray(v_p, dtype=float).reshape(plant.q)
    if strict and not plant.V.contains_point(v_p):
        raise MembershipViolation(f"measurement noise {v_p} outside V")
    return plant.C @ np.asarray(x_p, dtype=float).reshape(plant.n) + v_p


def double_integrator():
    """Disturbed double integrator with 0.1 s sampling and the benchmark bounds."""
    plant = PlantModel(
        A=[[1.0, 0.1], [0.0, 1.0]],
        B=[[0.005], [0.1]],
        C=[[1.0, 0.0]],
        X=Polytope.from_box([-20, -20], [20, 20]),
        U=Polytope.from_box([-20], [20]),
        W=Polytope.from_box([-0.002, -0.002], [0.002, 0.002]),
        V=Polytope.from_box([-0.001], [0.001]),
        Q=10.0 * np.eye(2),
        R=[[1.0]],
    )
    net = NetworkSpec(g=1, c=3, b=10, beta0=10)
    return plant, net


def with_sets(plant: PlantModel, **sets):
    """Copy of ``plant`` with some sets or matrices replaced."""
    return replace(plant, **sets)
