import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lprnn import _backend

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=["python", "cython"])
def backend(request):
    """Run a test once per kernel backend, restoring the active one afterwards."""
    if request.param == "cython" and _backend.compiled_kernels is None:
        pytest.skip("compiled kernels not built")
    previous = _backend.NAME
    _backend.use(request.param)
    yield request.param
    _backend.use(previous)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(capsys):
    """Record and print one ``PASS``/``FAIL`` line for an acceptance criterion."""
    def _verdict(number, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}"
        if detail:
            line += f"  [{detail}]"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return _verdict


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
