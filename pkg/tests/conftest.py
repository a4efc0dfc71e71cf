import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


N_CRITERIA = 17
_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def report(request):
    """report(n, ok, detail) records one acceptance line, then asserts ok."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def _report(n: int, ok: bool, detail: str):
        store[n] = (bool(ok), detail)
        assert ok, f"criterion {n}: {detail}"

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE, None)
    if not store:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        ok, detail = store.get(n, (False, "not reached (error before the check)"))
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
