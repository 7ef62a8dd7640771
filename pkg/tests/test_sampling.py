import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zetamax import sampling as S
from zetamax import zeta as z
from zetamax.errors import CoverageError, DomainError

KS = np.arange(-500, 501)


@pytest.fixture(scope="module")
def ker():
    return S.default_interp_kernel()


def _recon(f, lam, x, ker):
    nodes = KS * math.pi / (2 * lam)
    return S.reconstruct((KS, f(nodes)), lam, x, ker).value


def test_kernel_shape(ker):
    assert ker.hat(0.0) == 1.0
    assert ker.hat_plateau[0] <= -math.pi / 2 and ker.hat_plateau[1] >= math.pi / 2
    assert -math.pi < ker.hat_support[0] and ker.hat_support[1] < math.pi
    assert float(ker.hat(ker.hat_support[1] + 1e-9)) == 0.0
    y = np.linspace(0, 40, 4001)
    assert np.max(np.abs(ker(y) - ker(-y))) <= 1e-12


def test_kernel_integral(ker):
    g = ker.grid
    v = ker.values
    integral = 2 * np.sum(v) * ker.step - v[0] * ker.step
    assert integral == pytest.approx(1.0, abs=1e-8)


def test_certified_decay(ker):
    g, v = ker.grid, ker.values
    for A, K in ker.decay_constants.items():
        assert np.max(np.abs(v) * (1 + g ** A) / K) <= 1.0


def test_partition_of_unity(ker, rng):
    u = rng.uniform(-3, 3, 1000)
    s = ker(u[:, None] - KS[None, :]).sum(axis=1)
    assert np.max(np.abs(s - 1)) <= 1e-8


def test_constant_function(ker):
    lam = 3.0
    x = np.linspace(-1, 1, 21)
    out = _recon(lambda t: np.ones_like(t), lam, x, ker)
    assert np.max(np.abs(out - 1)) <= 1e-8


def test_single_exponential_in_band(ker):
    lam = 4.0
    mu = lam / 2
    x = np.linspace(-1, 1, 201)
    out = _recon(lambda t: np.exp(1j * mu * t), lam, x, ker)
    assert np.max(np.abs(out - np.exp(1j * mu * x))) <= 1e-8


def test_out_of_band_is_not_reconstructed(ker):
    lam = 4.0
    x = np.linspace(-1, 1, 201)
    out = _recon(lambda t: np.exp(1.5j * lam * t), lam, x, ker)
    assert np.max(np.abs(out - np.exp(1.5j * lam * x))) > 0.1


def test_random_band_limited(ker, rng):
    x = np.linspace(-2, 2, 401)
    worst = 0.0
    for _ in range(50):
        lam = rng.uniform(0.5, 10)
        n = rng.integers(1, 8)
        mu = rng.uniform(-lam, lam, n)
        c = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
        c /= np.maximum(1, np.abs(c))
        f = lambda t: np.exp(1j * np.outer(t, mu)) @ c
        worst = max(worst, np.max(np.abs(_recon(f, lam, x, ker) - f(x))))
    assert worst <= 1e-7


def test_translation_covariance(ker):
    lam, mu, c = 2.0, 1.3, 0.37
    f = lambda t: np.exp(1j * mu * t) + 0.5 * np.exp(-0.4j * t)
    shifted = lambda t: f(t - c)
    x = np.linspace(-1, 1, 11)
    a = _recon(shifted, lam, x, ker)
    b = f(x - c)
    assert np.max(np.abs(a - b)) <= 1e-10


def test_coverage_error(ker):
    ks = np.arange(-5, 6)
    with pytest.raises(CoverageError) as e:
        S.reconstruct((ks, np.ones(11)), 1.0, 0.0, ker)
    listed = list(e.value.missing)
    assert listed and not set(listed) & set(ks.tolist())
    assert listed[0] == math.floor(-ker.tail_radius(1e-12))


def test_dense_sup_examples():
    assert S.dense_sup(lambda t: np.full_like(t, 2.5), 0, 1, 10) == 2.5
    assert S.dense_sup(np.sin, 0, math.pi, 1000) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        S.dense_sup(np.sin, 1, 0, 10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 20), st.floats(0.1, 5), st.integers(2, 200))
def test_dense_sup_refines(freq, width, n):
    f = lambda t: np.sin(freq * t) + 0.3 * np.cos(2.7 * t)
    assert S.dense_sup(f, 0, width, n) <= S.dense_sup(f, 0, width, 10 * n) + 1e-12


def test_spacing_and_count():
    assert S.sample_spacing(1e6) == pytest.approx(0.13114, abs=5e-6)
    b = S.certified_sup_bound_zeta_sq(1e4, 1.0, 1e6)
    first = 2 * math.floor(math.log(1e6 / (2 * math.pi))) + 1
    assert first == 23
    assert b.n_samples >= first


def test_certified_bound_domain():
    with pytest.raises(DomainError):
        S.certified_sup_bound_zeta_sq(60, 1.0, 1e6)      # t0 < 50(1 + h^4) = 100
    with pytest.raises(DomainError):
        S.certified_sup_bound_zeta_sq(2e6, 1.0, 1e6)     # t0 > T


def test_certified_bound_is_an_upper_bound(rng):
    for t0 in rng.uniform(1e3, 1e5, 10):
        b = S.certified_sup_bound_zeta_sq(t0, 1.0, 1e6)
        d = S.dense_sup(lambda t: z.riemann_siegel_Z(t) ** 2, t0 - 1, t0 + 1, 10_000)
        assert b.value >= d


def test_kernel_csv(tmp_path, ker):
    p = tmp_path / "k.csv"
    ker.to_csv(p, stride=4096)
    lines = p.read_text().splitlines()
    assert lines[0] == "y,phi"
    assert len(lines) > 100
