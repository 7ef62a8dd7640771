import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from zetamax import experiments as ex
from zetamax import surrogate as sur
from zetamax.errors import DomainError
from zetamax.kernels import default_smoothing_kernel


def quiet_config(*args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sur.derive_config(*args, **kw)


# ---- summaries --------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=200))
def test_summary_invariants(vals):
    s = ex.summarize(vals)
    q = list(s.quantiles.values())
    assert s.n_trials == len(vals)
    assert all(a <= b for a, b in zip(q, q[1:]))
    assert min(vals) <= q[0] and q[-1] <= max(vals)
    assert s.variance >= 0 and s.se == pytest.approx(math.sqrt(s.variance / len(vals)))


def test_summary_drops_nonfinite():
    s = ex.summarize([1.0, float("nan"), 3.0, float("inf"), None])
    assert s.n_trials == 2 and s.mean == 2.0


def test_summary_empty():
    s = ex.summarize([])
    assert s.n_trials == 0 and math.isnan(s.mean)


def test_binomial_standard_error(rng):
    x = rng.random(10_000)
    s = ex.summarize(x, {"low": lambda v: v < 0.3})
    p = s.probabilities["low"]
    assert abs(p - 0.3) < 4 * math.sqrt(0.21 / 10_000)
    assert s.probability_se["low"] == pytest.approx(math.sqrt(p * (1 - p) / 10_000))


def test_trial_record_rejects_u():
    with pytest.raises(DomainError):
        ex.TrialRecord(0, 1.5, {})


def test_trial_blocks_aligned():
    assert ex.trial_blocks([130, 0, 63, 64, 1]) == [[0, 1, 63], [64], [130]]


def test_trial_ids_validated():
    with pytest.raises(DomainError):
        ex._ids(10, [3, 10])
    with pytest.raises(DomainError):
        ex._ids(0, None)


# ---- test function ------------------------------------------------------------------------

def test_test_function_shape():
    f = ex.TestFunction()
    assert f.validate()
    assert f(-0.1) == 0 and f(1.1) == 0 and f(0.5) > 0
    g = ex.TestFunction(width=0.5, offset=2.0)
    assert g.validate() and g.support == (2.0, 2.5)
    with pytest.raises(DomainError):
        ex.TestFunction(offset=-1.0)


def test_J_vanishes_far_above_threshold():
    cfg = quiet_config(1e8, 1.0, 0.1, 3, H=32)
    r = ex.second_moment_J("G", cfg, 0.3, ex.TestFunction(offset=50.0), 64, seed=1)
    assert r.results["EJ"] == 0 and r.results["PJpos"] == 0
    assert r.checks["witness_always_found"]


def test_J_mean_matches_gaussian_integral():
    H, K, nu = 64, 2, 0.3
    cfg = quiet_config(1e8, 1.0, 0.1, K, H=H)
    fn = ex.TestFunction()
    x = ex.threshold_x(K, H, nu)
    sigma = math.sqrt(math.log(H) / (2 * K))
    one, _ = integrate.quad(lambda g: float(fn(g - x)) * stats.norm.pdf(g, scale=sigma), x, x + 1)
    r = ex.second_moment_J("G", cfg, nu, fn, 1024, seed=7)
    J = ex.column(r.records, "J")
    se = J.std(ddof=1) / math.sqrt(J.size)
    assert abs(J.mean() - H * one) < 3.5 * se
    assert r.checks["paley_zygmund_consistent"]


def test_pz_statistics_constant():
    s = ex.pz_statistics(np.full(10, 2.0))
    assert s["EJ"] == 2 and s["EJ2"] == 4 and s["PJpos"] == 1 and s["pz_ratio"] == 1


def test_second_moment_rejects_nu():
    cfg = quiet_config(1e8, 1.0, 0.1, 3, H=16)
    with pytest.raises(DomainError):
        ex.second_moment_J("G", cfg, 0.6, ex.TestFunction(), 10)
    with pytest.raises(DomainError):
        ex.second_moment_J("S0", cfg, 0.3, ex.TestFunction(), 10)


# ---- mean value estimate ---------------------------------------------------------------

def test_moment_k0_is_one():
    assert ex.moment_bound_check(1e4, 50, 0).ratio == 1.0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_moment_single_prime(k):
    # |2^{-1/2-it}|^{2k} = 2^{-k}, so the ratio is exactly 1/k!
    r = ex.moment_bound_check(1e3, 3, k, coeffs={2: 1.0})
    assert r.ratio == pytest.approx(1 / math.factorial(k), rel=1e-10)


def test_moment_first_power_near_one():
    r = ex.moment_bound_check(1e4, 50, 1)
    assert abs(r.ratio - 1) < 0.01
    assert r.quadrature_error < 1e-6 * r.lhs


def test_moment_precondition():
    assert not ex.moment_bound_check(1e4, 50, 2).strict_precondition
    with pytest.raises(DomainError):
        ex.moment_bound_check(1e4, 50, 3)


# ---- Laplace transforms ------------------------------------------------------------------

def test_laplace_zero_arguments(table_small):
    cfg = quiet_config(1e8, 1.0, 0.1, 3)
    r = ex.laplace_compare(cfg, 0, 2, [0, 0], [0, 0], 64, table_small, seed=3, g_mc=True)
    assert r.results["E_S0"] == 1 and r.results["E_V"] == 1 and r.results["E_G_mc"] == 1
    assert r.results["E_G_closed"] == 1


def test_laplace_imaginary_arguments_bounded(table_small):
    cfg = quiet_config(1e8, 1.0, 0.1, 3)
    r = ex.laplace_compare(cfg, 1, 4, [0.5j, -0.3j], [0.2j, 0.1j], 128, table_small, seed=4,
                           check_regime=False)
    for key in ("E_S0", "E_V", "E_G_closed"):
        assert abs(r.results[key]) <= 1 + 1e-12
    assert r.passed


def test_laplace_regime_enforced(table_small):
    cfg = quiet_config(1e8, 1.0, 0.1, 3)
    with pytest.raises(DomainError):
        ex.laplace_compare(cfg, 0, 0, [3.0, 0], [0, 0], 4, table_small)


# ---- tails ---------------------------------------------------------------------------------

def test_tails_huge_threshold_never_hit(table_small):
    r = ex.tail_probabilities(1e4, 1.0, 0.0, 1e3, 1e3, 1e3, default_smoothing_kernel(), table_small, 64, seed=2)
    assert r.results["P1"] == r.results["P2"] == r.results["P3"] == 0
    assert r.checks["P3_statistic_below_ceiling"]


def test_tails_shift_range(table_small):
    with pytest.raises(DomainError):
        ex.tail_probabilities(1e4, 0.5, 1.5, 1, 1, 1, default_smoothing_kernel(), table_small, 4)


# ---- zeta experiments ------------------------------------------------------------------------

def test_sup_wide_band_always_inside():
    r = ex.sup_experiment(1e4, 0.5, 10.0, 20, seed=5, certify=False)
    assert r.results["sup_re_normalized"]["probabilities"]["in_band"] == 1.0


def test_sup_certified_bound(rng):
    r = ex.sup_experiment(1e4, 0.5, 0.5, 12, seed=6, certify=True)
    assert r.results["certified_trials"] > 0
    assert r.checks["certified_bound_holds"]


def test_height_validated():
    with pytest.raises(DomainError):
        ex.sup_experiment(5.0, 0.5, 0.5, 2)
    with pytest.raises(DomainError):
        ex.selberg_clt_check(1e11, 2)


def test_selberg_worker_independence():
    a = ex.selberg_clt_check(1e6, 150, seed=8, workers=1)
    b = ex.selberg_clt_check(1e6, 150, seed=8, workers=2)
    assert [r.stats for r in a.records] == [r.stats for r in b.records]
    assert a.results == b.results


def test_partial_runs_merge_to_full():
    full = ex.selberg_clt_check(1e5, 100, seed=9)
    first = ex.selberg_clt_check(1e5, 100, seed=9, trial_ids=range(40))
    rest = ex.selberg_clt_check(1e5, 100, seed=9, trial_ids=range(40, 100), prior=first.records)
    assert rest.results == full.results


def test_lower_bound_chain(table_small):
    cfg = quiet_config(1e6, 1.0, 0.1, 3)
    r = ex.lower_bound_pipeline(cfg, 0.5, 16, table_small, seed=10)
    assert r.checks["combination_below_sharp_plus_p2"]
    assert r.results["beginning_floor"] == pytest.approx(-2 / math.sqrt(3) * ex.loglog(1e6))


def test_covariance_check_small(table_small):
    cfg = quiet_config(1e6, 1.0, 0.1, 3)
    r = ex.covariance_check(cfg, table_small, n_v=4096, n_g=2048, seed=11)
    assert r.results["telescoping"]["error"] <= 1e-12
    assert set(r.checks) == {"V_variance_within_3se", "telescoping_1e-12", "G_covariance_within_3se"}
