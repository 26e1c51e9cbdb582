import os
import warnings

import pytest
from hypothesis import HealthCheck, settings

from pursuit_lab.collision import RollingWindowViolation

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# (criterion, passed, detail) lines filled in by test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def no_window_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RollingWindowViolation)
        yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
