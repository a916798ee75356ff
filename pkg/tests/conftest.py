from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_criteria: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    detail = dict(report.user_properties).get("detail", "")
    _criteria.append((name, "PASS" if report.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in sorted(_criteria):
        terminalreporter.write_line(f"{status} {name} {detail}".rstrip())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(rng, n, batch=()):
    from gmfg.torus import TorusGrid

    raw = rng.random(batch + (n,)) + 0.05
    return raw / (TorusGrid(n).h * raw.sum(axis=-1, keepdims=True))
