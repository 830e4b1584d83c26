"""Assemble the full controller design (observer, error feedback, tightened
sets, terminal ingredients) for one actuator kind and horizon bound."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import invariant_sets as inv
from . import polytope as pt
from .ocp import OcpConfig, OcpContext, tighten
from .system import NetworkSpec, PlantModel
from .terminal import synthesize_terminal, verify_assumptions


@dataclass
class DesignOptions:
    H: int = 5
    N_bar: int = 6
    S: float = 1e-6
    noise_weight: float = 1.0
    input_scale: float = 3.5   # scaling of R in the K_p Riccati design
    L_p: np.ndarray = None
    K_p: np.ndarray = None
    K_f: np.ndarray = None


def build_design(plant: PlantModel, net: NetworkSpec, kind, opts: DesignOptions = None,
                 observer: inv.ObserverDesign = None) -> OcpContext:
    """Run the synthesis chain and return a verified :class:`OcpContext`.

    A precomputed ``observer`` can be shared between kinds since it does not
    depend on the actuator.
    """
    opts = DesignOptions() if opts is None else opts
    kind = inv.ActuatorKind.parse(kind)
    cfg = OcpConfig(opts.N_bar, net.M, opts.H, np.atleast_2d(opts.S))
    cfg.check_weights(plant.R)
    if observer is None:
        observer = inv.synthesize_observer(plant, opts.noise_weight, L_p=opts.L_p)
    K_p = opts.K_p
    if K_p is None:
        K_p = inv.synthesize_feedback_gain(plant, kind, opts.H, input_scale=opts.input_scale)
    elif kind is inv.ActuatorKind.ZOH and inv.certify_zoh_gain(plant, K_p, opts.H) is None:
        raise inv.SynthesisError("supplied K_p has no ZOH certificate for this H")
    feedback = inv.compute_rci(plant, kind, K_p, observer, opts.H)
    tightened = tighten(plant, observer.Psi_p, feedback.Omega_p, feedback.KOmega_p)
    terminal = synthesize_terminal(plant, net.M, tightened, K_f=opts.K_f)
    return OcpContext(plant, net, kind, observer, feedback, tightened, terminal, cfg)


def design_margins(ctx: OcpContext):
    """Every certificate of a design as ``{name: margin}``."""
    out = {"estimation_rpi": inv.verify_estimation_rpi(ctx.observer, ctx.plant)}
    if ctx.kind is inv.ActuatorKind.ZOH:
        cert = inv.certify_zoh_gain(ctx.plant, ctx.feedback.K_p, ctx.feedback.H)
        out["zoh_gain_lmi"] = -np.inf if cert is None else inv.zoh_lmi_margin(*cert, ctx.plant, ctx.feedback.H)
    for i, m in enumerate(inv.rci_margins(ctx.feedback, ctx.plant, ctx.observer), start=1):
        out[f"rci_i{i}"] = m
    m1, m2 = verify_assumptions(ctx.terminal, ctx.plant, ctx.tightened)
    out["terminal_sets"] = m1
    out["terminal_cost"] = m2
    return out


def area_table(plant, net, kinds, Hs, opts: DesignOptions = None):
    """``{(kind, H): (area(Omega_p), area(Omega_p ⊕ Psi_p))}`` for a grid."""
    opts = DesignOptions() if opts is None else opts
    obs = inv.synthesize_observer(plant, opts.noise_weight, L_p=opts.L_p)
    out = {}
    for kind in kinds:
        kind = inv.ActuatorKind.parse(kind)
        for H in Hs:
            K = opts.K_p
            if K is None:
                K = inv.synthesize_feedback_gain(plant, kind, H, input_scale=opts.input_scale)
            fb = inv.compute_rci(plant, kind, K, obs, H)
            out[kind, H] = (pt.volume(fb.Omega_p), pt.volume(pt.minkowski_sum(fb.Omega_p, obs.Psi_p)))
    return out
