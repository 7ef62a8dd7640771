import math

import numpy as np
import pytest
import sympy
from scipy.integrate import trapezoid
from hypothesis import given, settings, strategies as st

from zetamax import kernels as K
from zetamax.errors import DomainError
from zetamax.primes import sieve

# mpmath quadrature of the L2-normalized bump on [-1/2, 1/2]
PHI_0 = 0.117872151918700029878
PSI_03 = 0.617604830801676012728
# sum over p <= 10^6 and 3 <= k <= 60 of p^{-k/2} (mpmath, 30 digits)
POWER_TAIL = 2.11140085360983060888


def test_psi_normalization(kernel):
    assert kernel.psi(0.0) == pytest.approx(1.0, abs=1e-10)
    assert kernel.psi(0.3) == pytest.approx(PSI_03, abs=1e-8)
    y = np.linspace(-1.2, 1.2, 2401)
    v = kernel.psi(y)
    assert np.all(v[np.abs(y) >= kernel.support_A] == 0)
    assert np.all((v >= -1e-12) & (v <= 1 + 1e-12))
    assert np.max(np.abs(v - v[::-1])) <= 1e-12


def test_phi_properties(kernel):
    assert kernel.phi(0.0) == pytest.approx(PHI_0, abs=1e-8)
    vals = kernel.phi_values
    assert np.all(vals >= -1e-15)
    integral = kernel.phi_step * (2 * np.sum(vals) - vals[0])
    assert integral == pytest.approx(1.0, abs=1e-8)
    assert kernel.phi(3.0) == kernel.phi(-3.0)


def test_phi_is_fourier_pair(kernel):
    # psi(y) = integral phi(t) e^{-iyt} dt, checked at a few y by the trapezoid rule
    t = np.arange(kernel.phi_values.size) * kernel.phi_step
    w = np.full(t.size, 2.0)
    w[0] = 1.0
    for y in (0.1, 0.45, 0.8):
        val = kernel.phi_step * np.sum(w * kernel.phi_values * np.cos(y * t))
        assert val == pytest.approx(kernel.psi(y), abs=1e-8)


def test_build_domain():
    with pytest.raises(DomainError):
        K.build_smoothing_kernel(0.2)
    k = K.build_smoothing_kernel(1.0)
    assert k.support_A == 2.0


def test_alpha_hat_real_axis(kernel):
    x = np.linspace(-0.5, 0.5, 200001)
    for z in (0.0, 3.0, 40.0):
        ref = trapezoid(kernel.alpha(x) * np.cos(z * x), x)
        assert kernel.alpha_hat(z)[0].real == pytest.approx(ref, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 10**6))
def test_ell_matches_factorization(n):
    f = sympy.factorint(n)
    expected = 1.0 / next(iter(f.values())) if len(f) == 1 else 0.0
    w = K.EllWeight.of(n)
    assert w.value == expected
    assert (w.value == 1.0) == sympy.isprime(n)


def test_ell_examples():
    assert K.ell(8) == pytest.approx(1 / 3)
    assert K.ell(12) == 0.0
    assert K.EllWeight.of(3 ** 5).prime == 3
    with pytest.raises(DomainError):
        K.ell(1)


def test_lambda_psi_empty(kernel, table_small):
    assert K.lambda_psi(table_small, 100.0, 0.5, kernel) == 0


def test_lambda_psi_table_too_small(kernel):
    with pytest.raises(DomainError, match="table limit"):
        K.lambda_psi(sieve(1000), 10.0, 13.0, kernel)


def test_lambda_psi_brute_force(kernel):
    table = sieve(10_000)
    tau, H = 37.5, 6.0
    total = 0j
    for n in range(2, int(math.exp(kernel.support_A * H)) + 1):
        w = K.ell(n)
        if w:
            total += w * n ** (-0.5 - 1j * tau) * kernel.psi(math.log(n) / H)
    assert abs(K.lambda_psi(table, tau, H, kernel) - total) <= 1e-11


def test_identity_at_sigma_two(kernel, table_small, rng):
    for tau in rng.uniform(10, 1000, 5):
        for H in (3.0, 8.0):
            a = K.averaged_log_zeta(2.0, tau, H, kernel)
            b = K.lambda_psi(table_small, tau, H, kernel, sigma=2.0)
            assert abs(a.value - b) <= 1e-6


def test_identity_right_half_plane(kernel, table_small, rng):
    for _ in range(20):
        sigma = rng.uniform(1.1, 2.0)
        tau = rng.uniform(10, 500)
        a = K.averaged_log_zeta(sigma, tau, 4.0, kernel)
        b = K.lambda_psi(table_small, tau, 4.0, kernel, sigma=sigma)
        assert abs(a.value - b) <= max(1e-6, a.error_estimate)


def test_critical_line_with_pole_term(kernel, table_small):
    for tau in (1234.5, 5678.9):
        a = K.averaged_log_zeta(0.5, tau, 5.0, kernel)
        b = K.lambda_psi(table_small, tau, 5.0, kernel) + K.pole_correction(0.5, tau, 5.0, kernel)
        assert abs(a.value - b) <= a.error_estimate
        assert a.error_estimate < 1e-3


def test_pole_term_vanishes_right_of_one(kernel):
    assert K.pole_correction(1.0, 100.0, 5.0, kernel) == 0
    assert abs(K.pole_correction(0.5, 100.0, 5.0, kernel)) < 1e-15


def test_truncation_tail(kernel):
    r = kernel.truncation_radius(1e-8)
    assert kernel.tail_mass(r) <= 1e-8
    t = np.linspace(-r, r, 200001)
    assert trapezoid(kernel.phi(t), t) == pytest.approx(1.0, abs=2e-8)


def test_power_tail_oracle(table_1e6):
    p = table_1e6.primes.astype(float)
    total = math.fsum(math.fsum(p ** (-k / 2)) for k in range(3, 61))
    assert total == pytest.approx(POWER_TAIL, abs=1e-12)


def test_prime_sum_sharp(table_small):
    assert K.prime_sum_sharp(table_small, 10.0, 0.5) == 0
    p, _ = table_small.upto(math.exp(9.0))
    ref = math.fsum(p.astype(float) ** -0.5)
    s = K.prime_sum_sharp(table_small, 0.0, 9.0)
    assert s.imag == 0 and s.real == pytest.approx(ref, rel=1e-13)
    for tau in (1.0, 1e3, 1e7):
        assert abs(K.prime_sum_sharp(table_small, tau, 9.0, 0.3)) <= ref + 1e-12


def test_discrepancy_near_empty(kernel, table_small):
    d = K.cutoff_discrepancy(table_small, 50.0, 0.5, kernel)     # no prime below e^0.5
    assert d.power_tail == 0 and d.smooth_vs_sharp == 0
    d = K.cutoff_discrepancy(table_small, 50.0, 1.2, kernel)     # only p = 2, 3
    assert d.power_tail == 0
    w = 1 - kernel.psi(np.log([2.0, 3.0]) / 1.2)
    assert d.smooth_vs_sharp <= float(np.sum(w / np.sqrt([2.0, 3.0]))) + 1e-15


def test_square_part_bound(kernel, table_small, rng):
    H = 10.0
    p, _ = table_small.upto(math.exp(kernel.support_A * H / 2))
    bound = 0.5 * math.fsum(1.0 / p.astype(float))
    for tau in rng.uniform(1e3, 1e8, 20):
        assert K.cutoff_discrepancy(table_small, tau, H, kernel).square_part <= bound


def test_sharp_kernel_has_no_discrepancy(table_small):
    d = K.cutoff_discrepancy(table_small, 321.0, 9.0, K.SharpCutoff())
    assert d.smooth_vs_sharp == 0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 12), st.floats(0.0, 3))
def test_terms_grow_with_H(H, dH):
    k = K.default_smoothing_kernel()
    t = _table()
    def support(h):
        cut = k.support_A * h
        _, lp = t.upto(math.exp(cut))
        return sum(int(np.count_nonzero(k.psi(j * lp[j * lp <= cut] / h) > 0))
                   for j in range(1, int(cut / math.log(2)) + 1))
    assert support(H) <= support(H + dH)


_T = {}


def _table():
    if "t" not in _T:
        _T["t"] = sieve(10**6)
    return _T["t"]


def test_discrepancy_csv(tmp_path, kernel, table_small):
    recs = K.discrepancy_sweep(table_small, [100.0, 200.0], 8.0, kernel)
    p = tmp_path / "d.csv"
    K.write_discrepancy_csv(p, recs)
    assert p.read_text().splitlines()[0] == "tau,H,power_tail,smooth_vs_sharp"
