import os

import pytest
from hypothesis import HealthCheck, settings

from goalforge.datagen import DomainCfg

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def small_cfg():
    """Domain config at a reduced resolution so tensors stay small."""
    return DomainCfg(resolution=(48, 80))


ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail, elapsed):
    status = "PASS" if ok else "FAIL"
    line = f"criterion {number} [{status}] {title}: {detail} ({elapsed:.1f}s)"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
