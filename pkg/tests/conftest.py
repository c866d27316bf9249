import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spacetime_swe.cases import manufactured_case
from spacetime_swe.fespace import SpaceConfig
from spacetime_swe.forms import make_spaces
from spacetime_swe.mesh import build_structured, uniform_refine

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def smooth_spec():
    return manufactured_case(T=0.5)


@pytest.fixture(scope="session")
def linear_spec():
    return manufactured_case(T=0.5, linearized=True)


@pytest.fixture(scope="session")
def small_spaces(smooth_spec):
    mesh = uniform_refine(build_structured(smooth_spec.x_range, smooth_spec.t_range, 2, 1), 1)
    return make_spaces(mesh, SpaceConfig(2))


ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def acceptance_report():
    """Record and immediately print one PASS/FAIL line per acceptance criterion."""
    def report(key, ok, detail, capsys=None):
        line = f"ACCEPTANCE {key} {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES[key] = line
        print("\n" + line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
