"""Design artifacts: every synthesized object of a run, written as sectioned
text and re-verified when read back."""
from __future__ import annotations

import numpy as np

from . import invariant_sets as inv
from . import polytope as pt
from .config import ConfigError, RunConfig, format_sections, parse_sections, polytope_from_record
from .design import build_design, design_margins
from .ocp import OcpConfig, OcpContext, TightenedSets
from .polytope import Polytope
from .terminal import TerminalDesign

VERSION = 1
MARGIN_TOL = -1e-9      # a certificate passes when its margin is >= this
REPRO_TOL = 1e-12       # load-time margins must reproduce stored ones to this


class ArtifactError(ConfigError):
    """Unreadable artifact or failed re-verification at load."""


class Artifact:
    """Config plus one verified :class:`OcpContext` per ``(kind, H)``."""

    def __init__(self, config: RunConfig, contexts: dict, margins: dict = None):
        self.config = config
        self.contexts = contexts
        self.margins = {key: design_margins(ctx) for key, ctx in contexts.items()} if margins is None else margins

    @classmethod
    def design(cls, config: RunConfig, progress=None):
        plant, net = config.plant(), config.network()
        base = config.design_options(config.H[0])
        observer = inv.synthesize_observer(plant, base.noise_weight, L_p=base.L_p)
        contexts = {}
        for kind in config.actuator_kinds():
            for H in config.H:
                contexts[kind, H] = build_design(plant, net, kind, config.design_options(H), observer=observer)
                if progress:
                    progress(kind, H)
        return cls(config, contexts)

    def context(self, kind, H):
        key = (inv.ActuatorKind.parse(kind), int(H))
        try:
            return self.contexts[key]
        except KeyError:
            raise ArtifactError(f"artifact has no design for {key[0].value}, H={key[1]}") from None

    # -- writing ---------------------------------------------------------------
    def sections(self):
        out = {"artifact": {"version": VERSION}}
        out.update(self.config.sections(prefix="config:"))
        first = next(iter(self.contexts.values()))
        obs = first.observer
        out["observer"] = {"L_p": obs.L_p, "Psi_p": obs.Psi_p, "Delta_p": obs.Delta_p, "margin": obs.margin}
        for (kind, H), ctx in self.contexts.items():
            tag = f"{kind.value}:H{H}"
            fb = ctx.feedback
            out["feedback:" + tag] = {
                "K_p": fb.K_p, "Omega_p": fb.Omega_p, "KOmega_p": fb.KOmega_p, "margin": fb.margin,
                "E": fb.E, "lambdas": [float(v) for v in fb.lambdas],
                "deltas": [float(v) for v in fb.deltas], "rho": float(fb.rho)}
            t = ctx.tightened
            out["tightened:" + tag] = {"Xhat_p": t.Xhat_p, "Xbar_p": t.Xbar_p, "Ubar_p": t.Ubar_p}
            tm = ctx.terminal
            out["terminal:" + tag] = {"K_f": tm.K_f, "P_f": tm.P_f, "Xf_p": tm.Xf_p, "M": tm.M,
                                      "iterations": tm.iterations}
            out["margins:" + tag] = {k: float(v) for k, v in self.margins[kind, H].items()}
        return out

    def dumps(self):
        return "# robust-retc design artifact\n" + format_sections(self.sections())

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    # -- reading ---------------------------------------------------------------
    @classmethod
    def loads(cls, text, reverify=True):
        sec = parse_sections(text)
        if sec.get("artifact", {}).get("version") != VERSION:
            raise ArtifactError("not a design artifact (missing or unknown version)")
        config = RunConfig.from_sections(sec, prefix="config:")
        plant, net = config.plant(), config.network()
        try:
            o = sec["observer"]
            observer = inv.ObserverDesign(np.asarray(o["L_p"], float), _poly(o, "Psi_p"), _poly(o, "Delta_p"),
                                          float(o["margin"]))
            contexts, stored = {}, {}
            for name in sec:
                if not name.startswith("feedback:"):
                    continue
                tag = name.split(":", 1)[1]
                kname, Hs = tag.split(":")
                kind, H = inv.ActuatorKind.parse(kname), int(Hs[1:])
                f, t, tm = sec[name], sec["tightened:" + tag], sec["terminal:" + tag]
                E = None if f["E"] is None else polytope_from_record(f["E"], "E")
                fb = inv.FeedbackDesign(kind, np.atleast_2d(np.asarray(f["K_p"], float)), _poly(f, "Omega_p"), H,
                                        _poly(f, "KOmega_p"), float(f["margin"]), E, list(f["lambdas"]),
                                        list(f["deltas"]), float(f["rho"]))
                tight = TightenedSets(_poly(t, "Xhat_p"), _poly(t, "Xbar_p"), _poly(t, "Ubar_p"))
                term = TerminalDesign(np.atleast_2d(np.asarray(tm["K_f"], float)),
                                      np.atleast_2d(np.asarray(tm["P_f"], float)), _poly(tm, "Xf_p"),
                                      int(tm["M"]), int(tm["iterations"]))
                cfg = OcpConfig(config.N_bar, net.M, H, np.atleast_2d(np.asarray(config.S, float)))
                contexts[kind, H] = OcpContext(plant, net, kind, observer, fb, tight, term, cfg)
                stored[kind, H] = {k: float(v) for k, v in sec["margins:" + tag].items()}
        except (KeyError, TypeError, ValueError) as e:
            raise ArtifactError(f"malformed artifact: {e!r}") from None
        if not contexts:
            raise ArtifactError("artifact contains no designs")
        art = cls(config, contexts, margins=stored if not reverify else None)
        if reverify:
            art.check_reproduced(stored)
        return art

    @classmethod
    def read(cls, path, reverify=True):
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as e:
            raise ArtifactError(f"cannot read artifact {path}: {e}") from None
        return cls.loads(text, reverify=reverify)

    def check_reproduced(self, stored):
        """Recomputed margins must match the stored ones."""
        for key, ms in stored.items():
            now = self.margins[key]
            for name, m in ms.items():
                if name not in now or abs(now[name] - m) > REPRO_TOL * max(1.0, abs(m)):
                    raise ArtifactError(f"margin {name} of {key[0].value}, H={key[1]} not reproduced "
                                        f"(stored {m!r}, recomputed {now.get(name)!r})")

    def all_margins(self):
        """Flat ``[(label, margin)]`` list of every certificate."""
        out = []
        for (kind, H), ms in self.margins.items():
            out += [(f"{kind.value} H={H} {name}", m) for name, m in ms.items()]
        return out

    def area_rows(self):
        """``{(kind, H): (area(Omega_p), area(Omega_p + Psi_p))}``."""
        return {key: (pt.volume(c.feedback.Omega_p),
                      pt.volume(pt.minkowski_sum(c.feedback.Omega_p, c.observer.Psi_p)))
                for key, c in self.contexts.items()}


def _poly(rec, key) -> Polytope:
    return polytope_from_record(rec[key], key)
