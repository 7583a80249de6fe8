import numpy as np
import pytest

from tunesel.dataset import Dataset


def scalar_data(n, seed=0, f=lambda x: np.sin(2 * np.pi * x), noise=0.5):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, n)
    return Dataset(x[:, None], f(x) + noise * rng.standard_normal(n))


def sparse_data(n, p, seed=0, s=3, noise=1.0, rho=0.0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, p))
    if rho:
        z = np.sqrt(1 - rho) * z + np.sqrt(rho) * rng.standard_normal((n, 1))
    beta = np.zeros(p)
    beta[:s] = 1.0
    return Dataset(z, z @ beta + noise * rng.standard_normal(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert it."""
    log = request.config.stash.setdefault(_ACCEPTANCE, {})
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        log[number] = line
        with capman.global_and_fixture_disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_ACCEPTANCE, {})
    if log:
        terminalreporter.section("acceptance criteria")
        for number in sorted(log):
            terminalreporter.write_line(log[number])
