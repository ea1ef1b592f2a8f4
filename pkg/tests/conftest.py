import time

import pytest

from geojam import scenario

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def default_stationary():
    """Default stationary dataset and its generation time in seconds."""
    t0 = time.perf_counter()
    records = scenario.gen_stationary(scenario.StationaryConfig())
    return records, time.perf_counter() - t0


@pytest.fixture(scope="session")
def default_timevariant():
    """Default time-variant dataset and its generation time in seconds."""
    t0 = time.perf_counter()
    ds = scenario.gen_timevariant(scenario.TimeVariantConfig())
    return ds, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
