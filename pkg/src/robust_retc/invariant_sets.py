"""Invariant sets bounding the estimation error and the control error.

The estimation error ``x_p - xhat_p`` is kept in an RPI set ``Psi_p`` by the
Luenberger observer.  The control error ``xhat - xbar`` is kept in a set
``Omega_p`` for up to ``H`` steps between transmissions, with an error
feedback that depends on what the actuator can compute:

* ``ZOH``: the actuator only holds the last update; the feedback is folded
  into the transmitted input.
* ``PREDICTION_BASED``: the actuator replays the nominal and an auxiliary
  prediction and applies ``K_p (xtilde_p - xbar_p)`` every step.
* ``LOCAL_MEASUREMENT``: the actuator runs its own observer copy and applies
  ``K_p (xhat_p - xbar_p)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import polytope as pt
from .numerics import dare_gain, dlyap, spectral_radius, symmetric_eigenvalues
from .polytope import Polytope
from .system import PlantModel


class ActuatorKind(enum.Enum):
    ZOH = "zoh"
    PREDICTION_BASED = "prediction"
    LOCAL_MEASUREMENT = "local"

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        s = str(s).strip().lower().replace("-", "_")
        aliases = {"zoh": cls.ZOH, "prediction": cls.PREDICTION_BASED,
                   "prediction_based": cls.PREDICTION_BASED, "local": cls.LOCAL_MEASUREMENT,
                   "local_measurement": cls.LOCAL_MEASUREMENT}
        try:
            return aliases[s]
        except KeyError:
            raise ValueError(f"unknown actuator kind {s!r}") from None


class SynthesisError(RuntimeError):
    """A set or gain could not be constructed or failed re-verification."""


@dataclass
class ObserverDesign:
    L_p: np.ndarray
    Psi_p: Polytope
    Delta_p: Polytope
    margin: float = np.nan


@dataclass
class FeedbackDesign:
    kind: ActuatorKind
    K_p: np.ndarray
    Omega_p: Polytope
    H: int
    KOmega_p: Polytope
    margin: float = np.nan
    E: Polytope = None
    lambdas: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    rho: float = np.nan


# ---------------------------------------------------------------------------
# matrix helpers
# ---------------------------------------------------------------------------

def b_power(A, B, i):
    """Accumulated hold input matrix ``sum_{j=0}^{i-1} A^j B``."""
    if i < 1:
        raise ValueError("b_power needs i >= 1")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    out = np.zeros_like(B)
    Aj = np.eye(A.shape[0])
    for _ in range(i):
        out = out + Aj @ B
        Aj = Aj @ A
    return out


def closed_loop_family(plant: PlantModel, kind: ActuatorKind, K_p, H):
    """``[A_K^1, ..., A_K^H]`` governing the control error after a transmission."""
    A, B = plant.A, plant.B
    K_p = np.atleast_2d(K_p)
    if kind is ActuatorKind.ZOH:
        return [np.linalg.matrix_power(A, i) + b_power(A, B, i) @ K_p for i in range(1, H + 1)]
    Acl = A + B @ K_p
    if kind is ActuatorKind.PREDICTION_BASED:
        return [np.linalg.matrix_power(Acl, i) for i in range(1, H + 1)]
    return [Acl]


def accumulated_disturbance(A, Delta_p, i):
    """``Delta ⊕ A Delta ⊕ ... ⊕ A^{i-1} Delta``."""
    return pt.minkowski_sum_all((pt.linear_image(np.linalg.matrix_power(A, j), Delta_p)
                                 for j in range(i)), Delta_p.dim)


def accumulated_disturbances(A, Delta_p, H):
    """List of the partial sums for ``i = 1..H``."""
    out, acc, Aj = [], Polytope.zero(Delta_p.dim), np.eye(A.shape[0])
    for _ in range(H):
        acc = pt.minkowski_sum(acc, pt.linear_image(Aj, Delta_p))
        out.append(acc)
        Aj = Aj @ A
    return out


# ---------------------------------------------------------------------------
# RPI outer approximation
# ---------------------------------------------------------------------------

def _full_dimensional(P):
    if P.is_empty:
        return False
    V = P.V
    return np.linalg.matrix_rank(V - V.mean(axis=0), tol=1e-12 * max(1.0, np.max(np.abs(V)))) == P.dim


def mrpi_outer(Acl, D, alpha=1e-3, max_terms=200):
    """Outer approximation of the minimal RPI set of ``e+ = Acl e + d``, ``d in D``.

    Finds the smallest ``J`` with ``Acl^J D' ⊆ alpha D'`` and returns
    ``(1 - alpha)^-1 (D' ⊕ Acl D' ⊕ ... ⊕ Acl^{J-1} D')``.  ``D'`` is ``D``
    when ``D`` is full-dimensional and otherwise ``D`` inflated by a box of
    relative size ``1e-3`` so the contraction test is meaningful.
    """
    Acl = np.atleast_2d(Acl)
    n = Acl.shape[0]
    if spectral_radius(Acl) >= 1.0:
        raise SynthesisError("closed-loop matrix is not Schur")
    if np.allclose(D.V, 0.0, atol=0.0):
        return Polytope.zero(n), 0
    Dp = D
    if n > 1 and not _full_dimensional(D):
        eps = 1e-3 * float(np.max(np.abs(D.V)))
        Dp = pt.minkowski_sum(D, Polytope.from_box(-eps * np.ones(n), eps * np.ones(n)))
    AJ = np.eye(n)
    for J in range(1, max_terms + 1):
        AJ = AJ @ Acl
        t = _scaling(pt.linear_image(AJ, Dp), Dp)
        if t <= alpha:
            break
    else:
        raise SynthesisError(f"mRPI truncation did not reach alpha={alpha} within {max_terms} terms")
    F = accumulated_disturbance(Acl, Dp, J)
    return pt.scale(F, 1.0 / (1.0 - t)), J


def _scaling(P, Q):
    """Smallest ``t`` with ``P ⊆ t Q`` for ``Q`` containing 0 in its interior."""
    return pt.is_subset_scaling(P, Q)


# ---------------------------------------------------------------------------
# observer
# ---------------------------------------------------------------------------

def observer_gain(plant: PlantModel, noise_weight=1.0):
    """Luenberger gain from the dual Riccati equation (``A - L C`` is Schur)."""
    _, Kd = dare_gain(plant.A.T, plant.C.T, np.eye(plant.n), noise_weight * np.eye(plant.q))
    return -Kd.T


def observer_disturbance_set(plant: PlantModel, L_p, Psi_p):
    """``L_p (C_p Psi_p ⊕ V_p)``."""
    return pt.linear_image(L_p, pt.minkowski_sum(pt.linear_image(plant.C, Psi_p), plant.V))


def estimation_disturbance_set(plant: PlantModel, L_p):
    """``W_p ⊕ (-L_p V_p)``."""
    return pt.minkowski_sum(plant.W, pt.linear_image(-np.atleast_2d(L_p), plant.V))


def synthesize_observer(plant: PlantModel, noise_weight=1.0, L_p=None) -> ObserverDesign:
    L_p = observer_gain(plant, noise_weight) if L_p is None else np.asarray(L_p, dtype=float).reshape(plant.n, plant.q)
    Acl = plant.A - L_p @ plant.C
    D = estimation_disturbance_set(plant, L_p)
    Psi_p, _ = mrpi_outer(Acl, D)
    design = ObserverDesign(L_p, Psi_p, observer_disturbance_set(plant, L_p, Psi_p))
    design.margin = verify_estimation_rpi(design, plant)
    if design.margin < -pt.TOL:
        raise SynthesisError(f"estimation-error RPI condition violated (margin {design.margin:.3e})")
    return design


def verify_estimation_rpi(design: ObserverDesign, plant: PlantModel):
    """Margin of ``(A - L C) Psi ⊕ W ⊕ (-L V) ⊆ Psi``."""
    Acl = plant.A - design.L_p @ plant.C
    lhs = pt.minkowski_sum(pt.linear_image(Acl, design.Psi_p),
                           estimation_disturbance_set(plant, design.L_p))
    return pt.margin_in(lhs, design.Psi_p)


# ---------------------------------------------------------------------------
# feedback gains
# ---------------------------------------------------------------------------

def zoh_lmi_blocks(X, Y, lam, plant: PlantModel, H):
    A, B = plant.A, plant.B
    out = []
    for i in range(1, H + 1):
        off = np.linalg.matrix_power(A, i) @ X + b_power(A, B, i) @ Y
        out.append(np.block([[X, off], [off.T, lam * X]]))
    return out


def zoh_lmi_margin(X, Y, lam, plant: PlantModel, H):
    """Smallest eigenvalue over all ZOH certificate blocks."""
    return min(float(symmetric_eigenvalues(0.5 * (M + M.T))[0])
               for M in zoh_lmi_blocks(X, Y, lam, plant, H))


def verify_zoh_lmi(X, Y, lam, plant: PlantModel, H, tol=1e-9):
    """Check the matrix inequalities certifying a ZOH gain ``K_p = Y X^-1``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if np.max(np.abs(X - X.T)) > 1e-10:
        raise ValueError("X must be symmetric")
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    return all(symmetric_eigenvalues(0.5 * (M + M.T))[0] >= -tol
               for M in zoh_lmi_blocks(X, Y, lam, plant, H))


def certify_zoh_gain(plant: PlantModel, K_p, H, lambdas=None):
    """Search ``lambda`` on a grid for an LMI certificate of a given gain.

    Returns ``(X, Y, lambda)`` or ``None``.  Candidate ``X`` matrices are
    inverses of Lyapunov solutions for the worst member of the family and for
    the sum over the whole family.
    """
    lambdas = np.round(np.arange(0.1, 0.951, 0.05), 10) if lambdas is None else lambdas
    family = closed_loop_family(plant, ActuatorKind.ZOH, K_p, H)
    if max(spectral_radius(M) for M in family) >= 1.0:
        return None
    worst = max(family, key=spectral_radius)
    Ps = [dlyap(worst, np.eye(plant.n))]
    Ps.append(sum(dlyap(M, np.eye(plant.n)) for M in family))
    for lam in lambdas:
        for P in Ps:
            X = np.linalg.inv(P)
            X = 0.5 * (X + X.T)
            Y = np.atleast_2d(K_p) @ X
            if verify_zoh_lmi(X, Y, lam, plant, H):
                return X, Y, float(lam)
    return None


def synthesize_feedback_gain(plant: PlantModel, kind: ActuatorKind, H, input_scale=1.0):
    """Error-feedback gain ``K_p``.

    Prediction-based and local-measurement actuators only need ``A + B K_p``
    Schur; the LQR gain for ``(Q, input_scale * R)`` is returned.  For the ZOH
    actuator that gain must also pass :func:`certify_zoh_gain`.  If it does
    not, faster gains (input weight divided by 10 and 100) and then slower
    ones (multiplied by 3 and 10) are tried in that order.
    """
    R = input_scale * plant.R
    _, K = dare_gain(plant.A, plant.B, plant.Q, R)
    if kind is not ActuatorKind.ZOH:
        return K
    for s in (1.0, 0.1, 0.01, 3.0, 10.0):
        _, K = dare_gain(plant.A, plant.B, plant.Q, s * R)
        if certify_zoh_gain(plant, K, H) is not None:
            return K
    raise SynthesisError(
        f"no certified ZOH feedback gain found for H={H}; supply K_p in the configuration")


# ---------------------------------------------------------------------------
# contractive set and [1, H] invariant sets
# ---------------------------------------------------------------------------

def _lambda_contractive(family, lam, seed, max_iter=200, floor_ref=None):
    """Largest ``S ⊆ seed`` with ``A S ⊆ lam S`` for every ``A`` in ``family``.

    Backward iteration ``S <- S ∩ {x : A x ∈ lam S}``; returns ``None`` if the
    iterate loses the origin from its interior or does not settle.  The
    interior test is absolute (relative to the unit-box seed): for ``lam``
    below the spectral radius the iterates collapse onto an invariant
    subspace, which is contractive but not a C-set.
    """
    floor = 1e-6 * float(np.min((seed if floor_ref is None else floor_ref).b))
    S = seed
    for _ in range(max_iter):
        rows = [S.A]
        offs = [S.b]
        for M in family:
            rows.append(S.A @ M)
            offs.append(lam * S.b)
        S_next = Polytope.from_halfspaces(np.vstack(rows), np.concatenate(offs))
        if S_next.is_empty or np.min(S_next.b) <= floor:
            return None
        if pt.margin_in(S, S_next) >= -1e-12 * np.max(S.b):
            return S_next
        S = S_next
    return None


def contractive_set(family, n, tol=1e-3, max_iter=200):
    """λ-contractive set for a matrix family with λ minimized by bisection.

    Returns ``(E, lam)``.
    """
    seed = Polytope.from_box(-np.ones(n), np.ones(n))
    # no lam below the largest spectral radius can be contractive
    lo, hi = max(spectral_radius(M) for M in family), 1.0
    if lo >= 1.0:
        raise SynthesisError("family contains a non-Schur matrix; no contractive set exists")
    best = None
    for lam in (0.999, 1.0 - tol):
        best = _lambda_contractive(family, lam, seed, max_iter)
        if best is not None:
            hi = lam
            break
    if best is None:
        raise SynthesisError("no contractive set with lambda < 1 for this gain and horizon")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        # the maximal mid-contractive set lies inside the hi-contractive one
        S = _lambda_contractive(family, mid, best, max_iter, floor_ref=seed)
        if S is None:
            lo = mid
        else:
            best, hi = S, mid
    return best, hi


def compute_rci(plant: PlantModel, kind: ActuatorKind, K_p, observer: ObserverDesign, H,
                alpha=1e-3) -> FeedbackDesign:
    """[1, H] invariant set ``Omega_p`` for the control error.

    ZOH and prediction-based: contractive set ``E`` for the family
    ``A_K^i``, contraction factors ``lam_i``, disturbance scalings ``delta_i``
    and ``Omega_p = max_i delta_i / (1 - lam_i) * E``.  Local measurement:
    RPI outer approximation for ``A + B K_p`` driven by ``Delta_p``.
    """
    K_p = np.atleast_2d(np.asarray(K_p, dtype=float)).reshape(plant.m, plant.n)
    if H < 1:
        raise ValueError("H must be >= 1")
    Delta = observer.Delta_p
    if kind is ActuatorKind.LOCAL_MEASUREMENT:
        Omega, _ = mrpi_outer(plant.A + plant.B @ K_p, Delta, alpha=alpha)
        design = FeedbackDesign(kind, K_p, Omega, H, pt.linear_image(K_p, Omega))
    else:
        family = closed_loop_family(plant, kind, K_p, H)
        E, _ = contractive_set(family, plant.n)
        lambdas = [_scaling(pt.linear_image(M, E), E) for M in family]
        sums = accumulated_disturbances(plant.A, Delta, H)
        deltas = [_scaling(S, E) for S in sums]
        if max(lambdas) >= 1.0:
            raise SynthesisError("contractive set does not contract every family member")
        rho = max(d / (1.0 - l) for d, l in zip(deltas, lambdas))
        Omega = pt.scale(E, rho)
        design = FeedbackDesign(kind, K_p, Omega, H, pt.linear_image(K_p, Omega),
                                E=E, lambdas=lambdas, deltas=deltas, rho=rho)
    design.margin = verify_rci(design, plant, observer)
    if design.margin < -pt.TOL:
        raise SynthesisError(
            f"[1,{H}] invariance condition violated for {kind.value} (margin {design.margin:.3e})")
    return design


def rci_margins(design: FeedbackDesign, plant: PlantModel, observer: ObserverDesign):
    """Containment margin for each ``i`` in ``1..H`` (one entry for local)."""
    family = closed_loop_family(plant, design.kind, design.K_p, design.H)
    if design.kind is ActuatorKind.LOCAL_MEASUREMENT:
        sums = [observer.Delta_p]
    else:
        sums = accumulated_disturbances(plant.A, observer.Delta_p, design.H)
    return [pt.margin_in(pt.minkowski_sum(pt.linear_image(M, design.Omega_p), S), design.Omega_p)
            for M, S in zip(family, sums)]


def verify_rci(design: FeedbackDesign, plant: PlantModel, observer: ObserverDesign):
    return min(rci_margins(design, plant, observer))


# ---------------------------------------------------------------------------
# runtime error feedback
# ---------------------------------------------------------------------------

def error_feedback(kind: ActuatorKind, gamma, nu_c, xhat_p, xtilde_p, xbar_p, K_p):
    """Control update and local error feedback ``(u_c, u_e)`` for one step."""
    K_p = np.atleast_2d(K_p)
    nu_c = np.asarray(nu_c, dtype=float).reshape(K_p.shape[0])
    xhat_p = np.asarray(xhat_p, dtype=float)
    xbar_p = np.asarray(xbar_p, dtype=float)
    zero = np.zeros(K_p.shape[0])
    if kind is ActuatorKind.ZOH:
        if gamma:
            return nu_c + K_p @ (xhat_p - xbar_p), zero
        return zero, zero
    u_c = nu_c if gamma else zero
    if kind is ActuatorKind.PREDICTION_BASED:
        return u_c, K_p @ (np.asarray(xtilde_p, dtype=float) - xbar_p)
    return u_c, K_p @ (xhat_p - xbar_p)
