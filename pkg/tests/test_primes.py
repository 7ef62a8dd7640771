import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zetamax import primes
from zetamax.errors import DomainError, ResourceError

MERTENS_M = 0.261497212847642783755   # mpmath.mertens


def trial_division_count(n):
    return sum(1 for k in range(2, n + 1) if all(k % d for d in range(2, int(k ** 0.5) + 1)))


def test_tiny_tables():
    assert len(primes.sieve(1)) == 0
    assert primes.sieve(10).primes.tolist() == [2, 3, 5, 7]
    assert primes.sieve(2).primes.tolist() == [2]


def test_count_1e6(table_1e6):
    assert len(table_1e6) == 78498
    assert table_1e6.count_upto(10**5) == 9592          # sympy.primepi


def test_small_counts_against_trial_division():
    for n in (97, 500, 2000):
        assert len(primes.sieve(n)) == trial_division_count(n)


def test_segmented_sieve_matches_single_segment():
    a = primes.sieve(300_000, segment=4096)
    b = primes.sieve(300_000)
    assert np.array_equal(a.primes, b.primes)


def test_logs_aligned(table_1e6):
    p = table_1e6.primes.astype(float)
    assert np.max(np.abs(table_1e6.logs - np.log(p)) / np.log(p)) <= 1e-14


def test_budget():
    with pytest.raises(ResourceError, match="budget"):
        primes.sieve(10**7, budget=10**6)


def test_mertens_small():
    t = primes.sieve(100)
    assert primes.mertens_sum(t, 1) == 0.0
    assert primes.mertens_sum(t, 10) == pytest.approx(1 / 2 + 1 / 3 + 1 / 5 + 1 / 7, abs=1e-15)
    with pytest.raises(DomainError):
        primes.mertens_sum(t, 101)


def test_mertens_drift(table_1e6):
    errs = [abs(primes.mertens_sum(table_1e6, x) - math.log(math.log(x)) - MERTENS_M)
            for x in (1e3, 1e4, 1e5, 1e6)]
    assert max(errs) <= 0.02
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] <= 0.01


def test_sigma_theta_oracle(table_1e6):
    # mpmath at 30 digits
    assert primes.sigma_theta(table_1e6, 1e4, 1.0) == pytest.approx(0.206611634743780496937, abs=1e-13)
    assert primes.sigma_theta(table_1e6, 1, 3.0) == 0.0
    assert primes.sigma_theta(table_1e6, 5e4, 0.0) == primes.mertens_sum(table_1e6, 5e4)


def test_chebyshev(table_1e6):
    assert primes.chebyshev_theta(table_1e6, 1) == 0.0
    assert primes.chebyshev_theta(table_1e6, 10) == pytest.approx(math.log(210), abs=1e-13)
    assert abs(primes.chebyshev_theta(table_1e6, 1e6) / 1e6 - 1) <= 0.01


@settings(max_examples=40, deadline=None)
@given(st.floats(2, 1e5), st.floats(2, 1e5), st.floats(-50, 50))
def test_monotone_and_cosine_bound(x, y, theta):
    t = _table()
    lo, hi = min(x, y), max(x, y)
    assert primes.mertens_sum(t, lo) <= primes.mertens_sum(t, hi)
    assert primes.chebyshev_theta(t, lo) <= primes.chebyshev_theta(t, hi)
    assert abs(primes.sigma_theta(t, hi, theta)) <= primes.mertens_sum(t, hi) + 1e-12


_CACHE = {}


def _table():
    if "t" not in _CACHE:
        _CACHE["t"] = primes.sieve(10**5)
    return _CACHE["t"]


def test_cache_roundtrip(tmp_path):
    t = primes.sieve(100_000)
    path = tmp_path / "p.bin"
    primes.save_cache(t, path)
    raw = path.read_bytes()
    assert int.from_bytes(raw[:8], "little") == 100_000
    assert len(raw) == 8 + 4 * len(t)
    back = primes.load_cache(path)
    assert back.limit == t.limit and np.array_equal(back.primes, t.primes)
    again = primes.cached_sieve(100_000, tmp_path)
    assert np.array_equal(again.primes, t.primes)
    assert (tmp_path / "primes_100000.bin").exists()


def test_log_phase_extended_precision():
    p = np.array([2, 3, 1_000_003])
    tau = 4.0e7 + 0.123
    import mpmath as mp
    mp.mp.dps = 40
    ref = [float(mp.fmod(mp.mpf(tau) * mp.log(int(q)), 2 * mp.pi)) for q in p]
    assert np.max(np.abs(primes.log_phase(p, tau) - ref)) <= 1e-10
