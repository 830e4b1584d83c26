"""Closed loop from x = (6, -2) under worst-case constant disturbances.

For each actuator kind the controller picks inputs and the transmission
schedule online.  The script prints when packets were sent, how the token
bucket emptied and refilled, and the outcome of every property check.

    python demos/closed_loop_benchmark.py [steps]
"""
import sys

import numpy as np

from robust_retc import ActuatorKind, SimConfig, build_design, check_trace, double_integrator, run_closed_loop
from robust_retc.invariant_sets import synthesize_observer

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 51
plant, net = double_integrator()
observer = synthesize_observer(plant)
sim = SimConfig(steps, "extremal_fixed", [6.0, -2.0], [0.0])

for kind in ActuatorKind:
    ctx = build_design(plant, net, kind, observer=observer)
    tr = run_closed_loop(ctx, sim)
    rep = check_trace(tr, ctx)
    sent = "".join("|" if g else "." for g in tr.gammas)
    levels = "".join(format(x.beta, "x") for x in tr.x)
    print(f"\n== {kind.value}: {tr.transmissions} transmissions, longest gap {tr.max_gap()}")
    print(f"sent   {sent}")
    print(f"bucket {levels}")
    print(f"|x| at end {np.linalg.norm(tr.x[-1].x_p):.4f}")
    for line in rep.lines():
        print("   " + line)
