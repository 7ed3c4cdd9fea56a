"""Acceptance bookkeeping: one pass/fail line per numbered criterion."""
import pytest

from rodca.config import load_config
from rodca.engine import Simulator

_LINES: dict = {}


def _line(n, passed, detail):
    line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    _LINES[n] = line
    print(line)
    return passed


@pytest.fixture
def criterion(request):
    """Report function for the test's ``criterion(n)`` marker.

    ``report(detail, **checks)`` records PASS only if every named check is
    true and returns the names of the failed checks. A test that dies before
    reporting is recorded as FAIL.
    """
    n = request.node.get_closest_marker("criterion").args[0]

    def report(detail, **checks):
        failed = [name for name, ok in checks.items() if not ok]
        _line(n, not failed, detail + (f"  failed: {', '.join(failed)}" if failed else ""))
        return failed

    yield report
    if n not in _LINES:
        _line(n, False, "did not complete")


@pytest.fixture(scope="session")
def warm_kernel():
    """Load the compiled simulation loop once so criteria time only their own work."""
    Simulator(load_config("desk", ["duration_slots=2000"])).run()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
