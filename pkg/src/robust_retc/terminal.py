"""Terminal cost, gain and set for the M-step cyclic horizon.

Over one cycle the terminal controller transmits ``K_f x`` once and holds it
for ``M`` steps, so the relevant closed loop is the lifted pair
``(A^M, B^M)`` with ``B^M = sum_{j<M} A^j B``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import polytope as pt
from .invariant_sets import SynthesisError, b_power
from .numerics import dare_gain, dlyap, symmetric_eigenvalues
from .polytope import Polytope
from .system import PlantModel, is_controllable, is_stabilizable

log = logging.getLogger(__name__)


@dataclass
class TerminalDesign:
    K_f: np.ndarray
    P_f: np.ndarray
    Xf_p: Polytope
    M: int
    iterations: int = 0

    def bucket_ok(self, beta, net):
        """Bucket block of the terminal region: integers in ``[c - g, b]``."""
        return net.c - net.g <= beta <= net.b


def lifted_system(plant: PlantModel, M):
    """``(A^M, B^M)``; logs when the lifted pair is not controllable."""
    if M < 1:
        raise ValueError("M must be >= 1")
    A_M = np.linalg.matrix_power(plant.A, M)
    B_M = b_power(plant.A, plant.B, M)
    if not is_controllable(A_M, B_M):
        log.warning("lifted pair (A^%d, B^%d) is not controllable", M, M)
    return A_M, B_M


def hold_maps(plant: PlantModel, K_f, M):
    """``A^i + B^i K_f`` for ``i = 0..M`` (``i = 0`` gives the identity)."""
    out = [np.eye(plant.n)]
    for i in range(1, M + 1):
        out.append(np.linalg.matrix_power(plant.A, i) + b_power(plant.A, plant.B, i) @ K_f)
    return out


def cycle_cost_matrix(plant: PlantModel, K_f, M):
    """Stage cost accumulated over one terminal cycle, as a quadratic form."""
    maps = hold_maps(plant, K_f, M)
    return sum(Mi.T @ plant.Q @ Mi for Mi in maps[:M]) + M * K_f.T @ plant.R @ K_f


def _admissible_set(plant, K_f, M, Xbar_p, Ubar_p):
    maps = hold_maps(plant, K_f, M)
    rows = [Xbar_p.A, Ubar_p.A @ K_f]
    offs = [Xbar_p.b, Ubar_p.b]
    for Mi in maps[1:M]:
        rows.append(Xbar_p.A @ Mi)
        offs.append(Xbar_p.b)
    return np.vstack(rows), np.concatenate(offs)


def max_admissible_set(Acl, G, h, max_iter=100, tol=1e-10):
    """Maximal invariant subset of ``{G x <= h}`` for ``x+ = Acl x``.

    Gilbert-Tan iteration: constraints ``G Acl^t x <= h`` are added until the
    next batch is redundant over the current set.  Returns ``(set, t*)``.
    """
    At = np.eye(Acl.shape[0])
    rows, offs = [G], [h]
    P = Polytope.from_halfspaces(G, h)
    for t in range(1, max_iter + 1):
        if P.is_empty:
            raise SynthesisError("maximal admissible set is empty")
        At = At @ Acl
        Gt = G @ At
        if np.all(pt.support_many(P, Gt) <= h + tol * np.maximum(1.0, np.abs(h))):
            return P, t - 1
        rows.append(Gt)
        offs.append(h)
        P = Polytope.from_halfspaces(np.vstack(rows), np.concatenate(offs))
    raise SynthesisError(f"Gilbert-Tan iteration did not terminate within {max_iter} steps")


def synthesize_terminal(plant: PlantModel, M, tightened, K_f=None, P_f=None) -> TerminalDesign:
    """Terminal ingredients for the lifted system.

    ``K_f`` is the LQR gain of ``(A^M, B^M)`` with weights ``(Q, M R)``;
    ``P_f`` solves the cycle Lyapunov equation, so the cost-decrease condition
    holds with equality.  Supplied ``K_f``/``P_f`` are used as given.
    """
    A_M, B_M = lifted_system(plant, M)
    if not is_stabilizable(A_M, B_M):
        raise SynthesisError("lifted pair is not stabilizable")
    if K_f is None:
        _, K_f = dare_gain(A_M, B_M, plant.Q, M * plant.R)
    K_f = np.atleast_2d(np.asarray(K_f, dtype=float)).reshape(plant.m, plant.n)
    Acl = A_M + B_M @ K_f
    if P_f is None:
        P_f = dlyap(Acl, cycle_cost_matrix(plant, K_f, M))
    P_f = np.atleast_2d(np.asarray(P_f, dtype=float))
    G, h = _admissible_set(plant, K_f, M, tightened.Xbar_p, tightened.Ubar_p)
    Xf, iters = max_admissible_set(Acl, G, h)
    if not Xf.contains_point(np.zeros(plant.n)):
        raise SynthesisError("terminal set does not contain the origin")
    design = TerminalDesign(K_f, P_f, Xf, M, iters)
    m1, m2 = verify_assumptions(design, plant, tightened)
    if m1 < -1e-8 or m2 < -1e-8:
        raise SynthesisError(f"terminal certificate failed (set margin {m1:.3e}, cost margin {m2:.3e})")
    return design


def verify_assumptions(design: TerminalDesign, plant: PlantModel, tightened):
    """``(margin1, margin2)``: set containments and cost-decrease inequality."""
    K_f, Xf, M = design.K_f, design.Xf_p, design.M
    maps = hold_maps(plant, K_f, M)
    margins = [pt.margin_in(Xf, tightened.Xbar_p),
               pt.margin_in(pt.linear_image(K_f, Xf), tightened.Ubar_p)]
    margins += [pt.margin_in(pt.linear_image(Mi, Xf), tightened.Xbar_p) for Mi in maps[1:M]]
    margins.append(pt.margin_in(pt.linear_image(maps[M], Xf), Xf))
    Acl = maps[M]
    lhs = Acl.T @ design.P_f @ Acl - design.P_f
    rhs = -cycle_cost_matrix(plant, K_f, M)
    D = -(lhs - rhs)
    eig = symmetric_eigenvalues(0.5 * (D + D.T))
    return float(min(margins)), float(eig[0])


def terminal_cost(design: TerminalDesign, xbar_p):
    x = np.asarray(xbar_p, dtype=float)
    return float(x @ design.P_f @ x)
