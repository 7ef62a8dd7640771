import numpy as np
import pytest

from zetamax.primes import sieve
from zetamax.kernels import default_smoothing_kernel


@pytest.fixture(scope="session")
def table_1e6():
    return sieve(10**6)


@pytest.fixture(scope="session")
def table_small():
    return sieve(5 * 10**5)


@pytest.fixture(scope="session")
def kernel():
    return default_smoothing_kernel()


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
