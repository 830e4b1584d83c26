"""Run configuration and design artifacts as sectioned plain text.

Grammar (both file kinds)::

    # comment
    [section]
    key = <python literal>

Values are read with :func:`ast.literal_eval` (plus ``nan``/``inf``), so matrices are nested lists
(``[[1.0, 0.1], [0.0, 1.0]]``), boxes are ``[lower, upper]`` pairs and
``None`` marks an unset option.  Floats are written with ``repr`` which
round-trips exactly.  Artifacts additionally carry polytope records as
``{"dim": n, "empty": False, "A": [[...]], "b": [...], "V": [[...]]}``.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np

from .design import DesignOptions
from .invariant_sets import ActuatorKind
from .polytope import Polytope
from .simulator import DisturbanceMode, SimConfig
from .system import NetworkSpec, PlantModel


class ConfigError(ValueError):
    """Malformed or inconsistent configuration / artifact text."""


_SPECIAL = {"nan": float("nan"), "inf": float("inf")}


class _Specials(ast.NodeTransformer):
    def visit_Name(self, node):
        if node.id in _SPECIAL:
            return ast.copy_location(ast.Constant(_SPECIAL[node.id]), node)
        raise ValueError(f"unknown name {node.id!r}")


def literal(text):
    """``ast.literal_eval`` that also accepts ``nan`` and ``inf``."""
    tree = _Specials().visit(ast.parse(text, mode="eval"))
    return ast.literal_eval(tree)


def parse_sections(text):
    """``{section: {key: value}}`` preserving file order."""
    out = {}
    cur = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            cur = line[1:-1].strip()
            if cur in out:
                raise ConfigError(f"line {lineno}: duplicate section [{cur}]")
            out[cur] = {}
            continue
        if cur is None:
            raise ConfigError(f"line {lineno}: key outside of a section")
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        try:
            out[cur][key.strip()] = literal(val.strip())
        except (ValueError, SyntaxError) as e:
            raise ConfigError(f"line {lineno}: cannot parse value for {key.strip()!r}: {e}") from None
    return out


def _lit(v):
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, Polytope):
        return repr(v.to_record())
    return repr(v)


def format_sections(sections):
    lines = []
    for name, body in sections.items():
        lines.append(f"[{name}]")
        lines += [f"{k} = {_lit(v)}" for k, v in body.items()]
        lines.append("")
    return "\n".join(lines)


def polytope_from_record(rec, name="polytope"):
    """Both representations are stored, so a reloaded set is bit-identical."""
    try:
        return Polytope.from_record(rec)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad polytope record {name}: {e}") from None


def _box(rec, name):
    try:
        lo, hi = rec
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a [lower, upper] pair") from None
    lo, hi = np.atleast_1d(np.asarray(lo, float)), np.atleast_1d(np.asarray(hi, float))
    if lo.shape != hi.shape or np.any(lo > hi):
        raise ConfigError(f"{name}: need lower <= upper of equal length")
    return Polytope.from_bounds(lo, hi)


@dataclass
class RunConfig:
    """Everything needed to design and simulate one benchmark."""

    A: list = field(default_factory=lambda: [[1.0, 0.1], [0.0, 1.0]])
    B: list = field(default_factory=lambda: [[0.005], [0.1]])
    C: list = field(default_factory=lambda: [[1.0, 0.0]])
    x_box: list = field(default_factory=lambda: [[-20.0, -20.0], [20.0, 20.0]])
    u_box: list = field(default_factory=lambda: [[-20.0], [20.0]])
    w_box: list = field(default_factory=lambda: [[-0.002, -0.002], [0.002, 0.002]])
    v_box: list = field(default_factory=lambda: [[-0.001], [0.001]])
    Q: list = field(default_factory=lambda: [[10.0, 0.0], [0.0, 10.0]])
    R: list = field(default_factory=lambda: [[1.0]])
    # network
    g: int = 1
    c: int = 3
    b: int = 10
    beta0: int = 10
    # design
    kinds: list = field(default_factory=lambda: ["zoh", "prediction", "local"])
    H: list = field(default_factory=lambda: [3, 4, 5, 6])
    noise_weight: float = 1.0
    input_scale: float = 3.5
    L_p: list = None
    K_p: list = None
    K_f: list = None
    # ocp
    N_bar: int = 6
    S: list = field(default_factory=lambda: [[1e-6]])
    # sim
    sim_H: int = 5
    steps: int = 51
    disturbance: str = "extremal_fixed"
    seed: int = 0
    x_p0: list = field(default_factory=lambda: [6.0, -2.0])
    u_s0: list = field(default_factory=lambda: [0.0])
    xhat0: list = None

    _LAYOUT = {
        "plant": ("A", "B", "C", "x_box", "u_box", "w_box", "v_box", "Q", "R"),
        "network": ("g", "c", "b", "beta0"),
        "design": ("kinds", "H", "noise_weight", "input_scale", "L_p", "K_p", "K_f"),
        "ocp": ("N_bar", "S"),
        "sim": ("sim_H", "steps", "disturbance", "seed", "x_p0", "u_s0", "xhat0"),
    }

    # -- io ---------------------------------------------------------------
    @classmethod
    def from_sections(cls, sections, prefix=""):
        kw = {}
        for sec, keys in cls._LAYOUT.items():
            body = sections.get(prefix + sec, {})
            unknown = set(body) - set(keys)
            if unknown:
                raise ConfigError(f"[{prefix}{sec}]: unknown keys {sorted(unknown)}")
            kw.update(body)
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def parse(cls, text):
        return cls.from_sections(parse_sections(text))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.parse(fh.read())

    def sections(self, prefix=""):
        return {prefix + sec: {k: getattr(self, k) for k in keys} for sec, keys in self._LAYOUT.items()}

    def serialize(self):
        return format_sections(self.sections())

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        return self.sections() == other.sections()

    # -- typed views ---------------------------------------------------------
    def plant(self) -> PlantModel:
        try:
            return PlantModel(self.A, self.B, self.C, _box(self.x_box, "x_box"), _box(self.u_box, "u_box"),
                              _box(self.w_box, "w_box"), _box(self.v_box, "v_box"), self.Q, self.R)
        except ValueError as e:
            raise ConfigError(f"plant: {e}") from None

    def network(self) -> NetworkSpec:
        try:
            return NetworkSpec(self.g, self.c, self.b, self.beta0)
        except ValueError as e:
            raise ConfigError(f"network: {e}") from None

    def design_options(self, H) -> DesignOptions:
        arr = lambda v: None if v is None else np.asarray(v, dtype=float)
        return DesignOptions(H=int(H), N_bar=self.N_bar, S=np.atleast_2d(np.asarray(self.S, float)),
                             noise_weight=self.noise_weight, input_scale=self.input_scale,
                             L_p=arr(self.L_p), K_p=arr(self.K_p), K_f=arr(self.K_f))

    def sim_config(self, strict=True, seed=None) -> SimConfig:
        mode = DisturbanceMode.parse(self.disturbance, self.seed if seed is None else seed)
        if seed is not None:
            mode = DisturbanceMode(mode.kind, int(seed))
        return SimConfig(self.steps, mode, x_p0=self.x_p0, u_s0=self.u_s0, xhat0=self.xhat0, strict=strict)

    def actuator_kinds(self):
        return [ActuatorKind.parse(k) for k in self.kinds]

    def validate(self):
        """Cross-field checks of the typed modules, run at load time."""
        plant = self.plant()
        net = self.network()
        try:
            kinds = self.actuator_kinds()
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if not kinds:
            raise ConfigError("design.kinds is empty")
        Hs = list(self.H)
        if not Hs or self.sim_H not in Hs:
            raise ConfigError("sim.sim_H must be one of design.H")
        S = np.atleast_2d(np.asarray(self.S, float))
        for H in Hs:
            if not self.N_bar >= H >= net.M:
                raise ConfigError(f"need N_bar >= H >= M, got N_bar={self.N_bar}, H={H}, M={net.M}")
        if np.linalg.eigvalsh(0.5 * (S + S.T))[0] <= 0:
            raise ConfigError("S must be positive definite")
        if np.linalg.eigvalsh(plant.R - S)[0] < -1e-12:
            raise ConfigError("need R >= S")
        if self.steps < 1:
            raise ConfigError("sim.steps must be >= 1")
        try:
            DisturbanceMode.parse(self.disturbance)
        except ValueError as e:
            raise ConfigError(f"sim.disturbance: {e}") from None
        if self.input_scale <= 0 or self.noise_weight <= 0:
            raise ConfigError("input_scale and noise_weight must be positive")
        return self


def benchmark_config():
    """The disturbed double-integrator benchmark, all kinds and ``H = 3..6``."""
    return RunConfig()
