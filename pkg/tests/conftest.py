import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def gf16():
    from semiclass.gf import field_make

    return field_make(2, 4)


@pytest.fixture(scope="session")
def gf4():
    from semiclass.gf import field_make

    return field_make(2, 2)


@pytest.fixture(scope="session")
def oracle_222():
    """Exhaustive spread sets of M_2(GF(4)) and their orbits, from the schoolbook oracle."""
    from oracles import brute_classify

    return brute_classify(2, [1, 1, 1], 2)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def report():
    """Record one PASS/FAIL/SKIP line per acceptance criterion."""

    def _add(criterion, ok, detail=""):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"{status} criterion {criterion}: {detail}".rstrip(": ")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
