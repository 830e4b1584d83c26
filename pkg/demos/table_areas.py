"""How much room does each actuator need?

Builds the control-error sets of the three actuator kinds for transmission
gaps H = 3..6 on the double-integrator benchmark and prints their areas.

A ZOH actuator holds the last input, so the error it accumulates between
transmissions grows fastest with H.  A prediction-based actuator replays a
model forecast and stays smaller.  An actuator that sees local measurements
corrects every step, so its set does not depend on H at all.

    python demos/table_areas.py
"""
from robust_retc import ActuatorKind, area_table, double_integrator

plant, net = double_integrator()
kinds = list(ActuatorKind)
Hs = (3, 4, 5, 6)
rows = area_table(plant, net, kinds, Hs)

print("area of Omega_p  (area of Omega_p + Psi_p)\n")
print("  H " + "".join(f"{k.value:>24s}" for k in kinds))
for H in Hs:
    print(f"{H:3d} " + "".join(f"{rows[k, H][0]:12.4f} ({rows[k, H][1]:8.4f})" for k in kinds))

zoh = [rows[ActuatorKind.ZOH, H][0] for H in Hs]
print(f"\nZOH set grows by a factor {zoh[-1] / zoh[0]:.2f} from H=3 to H=6;")
print("the local-measurement set is the same for every H.")
