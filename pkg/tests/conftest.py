import numpy as np
import pytest

from robust_retc import invariant_sets as inv
from robust_retc.design import DesignOptions, build_design
from robust_retc.system import double_integrator

KINDS = list(inv.ActuatorKind)
HS = (3, 4, 5, 6)


@pytest.fixture(scope="session")
def benchmark():
    return double_integrator()


@pytest.fixture(scope="session")
def plant(benchmark):
    return benchmark[0]


@pytest.fixture(scope="session")
def net(benchmark):
    return benchmark[1]


@pytest.fixture(scope="session")
def observer(plant):
    return inv.synthesize_observer(plant)


@pytest.fixture(scope="session")
def contexts(plant, net, observer):
    """One full design per actuator kind at the benchmark ``H = 5``."""
    return {k: build_design(plant, net, k, DesignOptions(H=5), observer=observer) for k in KINDS}


@pytest.fixture(scope="session")
def feedback_grid(plant, observer):
    """``{(kind, H): FeedbackDesign}`` over the area grid."""
    out = {}
    for kind in KINDS:
        for H in HS:
            K = inv.synthesize_feedback_gain(plant, kind, H, input_scale=DesignOptions.input_scale)
            out[kind, H] = inv.compute_rci(plant, kind, K, observer, H)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


# -- acceptance summary --------------------------------------------------------

ACCEPTANCE = {}


def record_criterion(name, passed, detail=""):
    prev = ACCEPTANCE.get(name)
    ok = passed if prev is None else (prev[0] and passed)
    text = detail if prev is None or not detail else f"{prev[1]}; {detail}"
    ACCEPTANCE[name] = (ok, text)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
