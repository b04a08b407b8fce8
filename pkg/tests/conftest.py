import os
import sys
import time

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

from congestopt import Grid, SourceConfig, build_source, minimize, quadratic_pair  # noqa: E402
from congestopt.solver import recover  # noqa: E402

REFERENCE_RUNS = {
    "fig1b": (0.02, 0.06),
    "fig1c": (0.02, 0.4),
    "fig2b": (0.001, 0.01),
    "fig2c": (0.001, 0.05),
}


class _Solves:
    def __init__(self):
        self._cache = {}
        self.seconds = {}

    def get(self, lam, k, cfg=None, n=30):
        key = (lam, k, n, cfg)
        if key not in self._cache:
            g = Grid(n, n)
            f = build_source(g, SourceConfig(lam))
            e = quadratic_pair(1.0, 4.0, k)
            t0 = time.perf_counter()
            u, rep = minimize(f, e, cfg)
            self.seconds[key] = time.perf_counter() - t0
            self._cache[key] = (f, e, u, rep, recover(u, e, smoothing=rep.smoothing))
        return self._cache[key]

    def elapsed(self, lam, k, cfg=None, n=30):
        self.get(lam, k, cfg, n)
        return self.seconds[(lam, k, n, cfg)]


@pytest.fixture(scope="session")
def solves():
    return _Solves()


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""
    results = request.config.stash[ACCEPTANCE]

    def record(number, title, passed, detail):
        results[number] = (title, bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, passed, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
