"""What schedules can the optimizer choose from?

Transmissions must come often enough that the error sets stay valid (no gap
longer than H) and rarely enough that the token bucket never runs dry.  This
script shows both filters at work on small cases.

    python demos/schedules_tour.py
"""
from robust_retc import NetworkSpec, enumerate_schedules
from robust_retc.ocp import Schedule, bucket_levels, bucket_feasible

net = NetworkSpec(1, 3, 10, 10)

print("N=3, H=3, s=0:", " ".join(str(s) for s in enumerate_schedules(3, 3, 0)))
print("the all-zero word is allowed only when the horizon ends before the next forced send:")
for N in (1, 2, 3):
    words = [str(s) for s in enumerate_schedules(N, 3, 0)]
    print(f"  N={N}: {'0' * N in words}")

sched = enumerate_schedules(6, 5, 0)
print(f"\nN=6, H=5, s=0 gives {len(sched)} schedules")
for beta in (10, 4, 2):
    ok = [s for s in sched if bucket_feasible(s, beta, net)]
    print(f"  bucket level {beta:2d}: {len(ok):2d} usable, e.g. {ok[0] if ok else '-'}")

w = Schedule("110100")
print(f"\nbucket levels for {w} from 10:", bucket_levels(w, 10, net))
print(f"bucket levels for {w} from 3: ", bucket_levels(w, 3, net))
