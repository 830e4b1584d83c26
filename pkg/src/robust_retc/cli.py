"""Command line front end.

Verbs::

    robust-retc design    [--config FILE] [--out ARTIFACT]
    robust-retc simulate  --artifact ARTIFACT [--config FILE] [--out CSV] [--kind K]
                          [--strict | --permissive] [--seed N] [--fault-inject SCALE[@STEP]]
    robust-retc verify    --artifact ARTIFACT
    robust-retc schedules N H S [--beta B]
    robust-retc report    (--artifact ARTIFACT | --config FILE) [--out CSV]

Exit codes: 0 all checks pass, 1 a property or certificate failed, 2 bad
input or a design step that could not be completed.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .artifact import MARGIN_TOL, Artifact, ArtifactError
from .config import ConfigError, RunConfig
from .invariant_sets import ActuatorKind, SynthesisError
from .numerics import ConvergenceError
from .ocp import DesignInfeasibleError, bucket_feasible, enumerate_schedules
from .simulator import PropertyFailure, check_trace, run_closed_loop
from .system import NetworkSpec, TokenBucketViolation

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
DESIGN_ERRORS = (ConfigError, SynthesisError, DesignInfeasibleError, ConvergenceError, ValueError)


def _load_config(path):
    return RunConfig() if path is None else RunConfig.load(path)


def area_table(rows, kinds, Hs):
    """Rows ``H``, columns kind; each cell ``area(Omega_p) / area(Omega_p + Psi_p)``."""
    head = "  H | " + " | ".join(f"{k.value:>21s}" for k in kinds)
    lines = [head, "-" * len(head)]
    for H in Hs:
        cells = []
        for k in kinds:
            a, b = rows[k, H]
            cells.append(f"{a:9.5f} / {b:9.5f}")
        lines.append(f"{H:3d} | " + " | ".join(cells))
    return "\n".join(lines)


def area_csv(rows):
    out = ["kind,H,area_Omega,area_Omega_plus_Psi"]
    out += [f"{k.value},{H},{a:.17g},{b:.17g}" for (k, H), (a, b) in rows.items()]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def cmd_design(args):
    cfg = _load_config(args.config)
    art = Artifact.design(cfg, progress=lambda k, H: print(f"designed {k.value} H={H}", file=sys.stderr))
    art.write(args.out)
    print(area_table(art.area_rows(), cfg.actuator_kinds(), cfg.H))
    bad = [(n, m) for n, m in art.all_margins() if m < MARGIN_TOL]
    for n, m in bad:
        print(f"FAIL {n} margin {m:.3e}")
    print(f"artifact written to {args.out}")
    return EXIT_FAIL if bad else EXIT_OK


def _fault(text):
    if text is None:
        return None, 1.0
    scale, _, step = str(text).partition("@")
    return (int(step) if step else 5), float(scale)


def cmd_simulate(args):
    art = Artifact.read(args.artifact)
    cfg = art.config if args.config is None else _load_config(args.config)
    kinds = [ActuatorKind.parse(k) for k in args.kind] if args.kind else cfg.actuator_kinds()
    fault_step, fault_scale = _fault(args.fault_inject)
    status = EXIT_OK
    for kind in kinds:
        ctx = art.context(kind, cfg.sim_H)
        sim = cfg.sim_config(strict=args.strict, seed=args.seed)
        sim.fault_step, sim.fault_scale = fault_step, fault_scale
        try:
            trace = run_closed_loop(ctx, sim)
        except (PropertyFailure, TokenBucketViolation) as e:
            print(f"{kind.value}: aborted: {e}")
            status = EXIT_FAIL
            continue
        rep = check_trace(trace, ctx)
        if args.out:
            path = args.out if len(kinds) == 1 else _suffixed(args.out, kind.value)
            trace.to_csv(path)
        m_con = min(rep.checks["state_constraints"][1], rep.checks["input_constraints"][1])
        print(f"{kind.value}: transmissions {trace.transmissions}  max gap {trace.max_gap()}  "
              f"min constraint margin {m_con:.4g}  final |xbar_p| {np.linalg.norm(trace.xbar[-1].x_p):.3e}  "
              f"{'PASS' if rep.passed else 'FAIL'}")
        if not rep.passed or args.verbose:
            print("\n".join("    " + line for line in rep.lines()))
        if not rep.passed:
            status = EXIT_FAIL
    return status


def _suffixed(path, tag):
    root, ext = os.path.splitext(path)
    return f"{root}_{tag}{ext or '.csv'}"


def cmd_verify(args):
    art = Artifact.read(args.artifact)
    ok = True
    for name, m in art.all_margins():
        passed = m >= MARGIN_TOL
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name:<36s} {m: .6e}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_schedules(args):
    words = enumerate_schedules(args.N, args.H, args.s)
    if args.beta is not None:
        net = NetworkSpec(args.g, args.c, args.b, max(args.beta, args.c - args.g))
        words = [w for w in words if bucket_feasible(w, args.beta, net)]
    for w in words:
        print(str(w))
    print(f"count {len(words)}")
    return EXIT_OK


def cmd_report(args):
    if args.artifact is not None:
        art = Artifact.read(args.artifact)
    else:
        art = Artifact.design(_load_config(args.config))
    cfg = art.config
    rows = art.area_rows()
    print(area_table(rows, cfg.actuator_kinds(), cfg.H))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(area_csv(rows))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="robust-retc", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="verb", required=True)

    d = sub.add_parser("design", help="synthesize all sets and gains, write an artifact")
    d.add_argument("--config")
    d.add_argument("--out", default="artifact.txt")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="closed-loop run(s) with property checks")
    s.add_argument("--artifact", required=True)
    s.add_argument("--config", help="override the configuration stored in the artifact")
    s.add_argument("--out", help="CSV trace (suffixed by kind when several kinds run)")
    s.add_argument("--kind", action="append", help="actuator kind; repeatable, default all")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--strict", dest="strict", action="store_true", default=True)
    g.add_argument("--permissive", dest="strict", action="store_false")
    s.add_argument("--seed", type=int)
    s.add_argument("--fault-inject", metavar="SCALE[@STEP]",
                   help="multiply the disturbance by SCALE at STEP (default 5)")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="re-check every certificate of an artifact")
    v.add_argument("--artifact", required=True)
    v.set_defaults(func=cmd_verify)

    sc = sub.add_parser("schedules", help="list the admissible transmission schedules")
    sc.add_argument("N", type=int)
    sc.add_argument("H", type=int)
    sc.add_argument("s", type=int)
    sc.add_argument("--beta", type=int, help="keep only schedules the bucket can serve from this level")
    sc.add_argument("--g", type=int, default=1)
    sc.add_argument("--c", type=int, default=3)
    sc.add_argument("--b", type=int, default=10)
    sc.set_defaults(func=cmd_schedules)

    r = sub.add_parser("report", help="area table of the control-error sets")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--artifact")
    src.add_argument("--config")
    r.add_argument("--out", help="also write the table as CSV")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ArtifactError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except DESIGN_ERRORS as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
