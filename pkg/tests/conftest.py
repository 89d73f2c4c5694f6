import numpy as np
import pytest

from funcwmw import Grid, LpGeometry


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def grid(d, mode="euclidean", a=0.0, b=1.0):
    return Grid(a, b, d, mode)


@pytest.fixture
def geom2():
    return LpGeometry(2.0)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    reporter = request.config.pluginmanager.getplugin("terminalreporter")

    def record(number, title, ok, detail):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"[{status}] criterion {number:>2}: {title} | {detail}"
        ACCEPTANCE_LINES.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
