import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_spd(rng, n, beta=1, spread=1.0):
    G = rng.standard_normal((n, n))
    if beta == 2:
        G = G + 1j * rng.standard_normal((n, n))
    w = np.exp(spread * rng.standard_normal(n))
    Q, _ = np.linalg.qr(G)
    return (Q * w) @ Q.conj().T


def random_invertible(rng, n, beta=1):
    A = rng.standard_normal((n, n)) + 2 * np.eye(n)
    if beta == 2:
        A = A + 1j * rng.standard_normal((n, n))
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """``criterion(ok, detail)`` records a verdict for the test's criterion marker and asserts it.

    A test that raises before recording is reported as FAIL.
    """
    k = request.node.get_closest_marker("criterion").args[0]
    store = request.config.stash.setdefault(CRITERIA, {})

    def record(ok, detail):
        store[k] = (bool(ok), detail)
        assert ok, f"criterion {k}: {detail}"

    yield record
    store.setdefault(k, (False, "raised before reaching a verdict"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(CRITERIA, None)
    if not store:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(store):
        ok, detail = store[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
