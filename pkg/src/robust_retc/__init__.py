"""Robust rollout event-triggered control of a networked LTI plant whose
transmissions are shaped by a token bucket.

The controller solves, at every step, a tube-based optimal control problem
over both the control inputs and the binary transmission schedule.  Set
computations live in :mod:`robust_retc.polytope`, the synthesis chain in
:mod:`robust_retc.invariant_sets`, :mod:`robust_retc.terminal` and
:mod:`robust_retc.design`, the online problem in :mod:`robust_retc.ocp` and
the closed loop in :mod:`robust_retc.simulator`.
"""
from .design import DesignOptions, area_table, build_design, design_margins
from .invariant_sets import ActuatorKind, SynthesisError
from .ocp import OcpConfig, OcpContext, enumerate_schedules, solve_ocp
from .polytope import Polytope
from .simulator import SimConfig, check_trace, run_closed_loop
from .system import NcsInput, NcsState, NetworkSpec, PlantModel, double_integrator

__version__ = "0.1.0"

__all__ = [
    "ActuatorKind", "DesignOptions", "NcsInput", "NcsState", "NetworkSpec", "OcpConfig", "OcpContext",
    "PlantModel", "Polytope", "SimConfig", "SynthesisError", "area_table", "build_design", "check_trace",
    "design_margins", "double_integrator", "enumerate_schedules", "run_closed_loop", "solve_ocp",
]
