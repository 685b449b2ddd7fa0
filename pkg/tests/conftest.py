import math

import pytest

from orbits.groups import build_modular
from orbits.patterson import patterson_measure
from orbits.suites import _schottky_data

ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session")
def modular_nu():
    return patterson_measure(build_modular(), 1.0, 0.05, n_min=20_000)


@pytest.fixture(scope="session")
def schottky_data():
    """``(spec, delta estimate, nu)`` for the default Schottky group."""
    return _schottky_data((2.5, 2.5, math.pi / 2), 1e4)


@pytest.fixture
def record():
    """Store one acceptance verdict; printed in the terminal summary."""

    def _record(name, ok, detail):
        ACCEPTANCE_RESULTS[name] = (bool(ok), detail)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k[2:].split("_")[0])):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
