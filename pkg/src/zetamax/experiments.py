"""Monte Carlo experiments at desk scale.

Every experiment is split into a per-block trial function, which maps a list
of trial ids to TrialRecords using only (parameters, seed, trial id), and an
aggregation step over the records in trial-id order. Serial and parallel runs
therefore produce identical records, and a summary computed from a reloaded
trials CSV equals the in-memory one.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache, partial
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats as sps

from . import kernels as kmod
from . import sampling
from . import surrogate as sur
from . import zeta as zmod
from .errors import DomainError, NumericalError, ZetamaxError
from .primes import PrimeTable, cached_sieve, dirichlet_terms
from .rng import trial_uniform

QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
BLOCK = sur.BLOCK
MAX_HEIGHT = 1e10


def loglog(T: float) -> float:
    return math.log(math.log(T))


# ---- records and summaries ---------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    u: float
    stats: dict

    def __post_init__(self):
        if not 0.0 <= self.u <= 1.0:
            raise DomainError(f"u = {self.u} outside [0, 1]")


@dataclass(frozen=True)
class SummaryStats:
    n_trials: int
    mean: float
    variance: float
    se: float
    quantiles: dict
    probabilities: dict = field(default_factory=dict)
    probability_se: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _qname(q: float) -> str:
    return f"q{int(round(q * 100)):02d}"


def summarize(values: Iterable[float], events: dict | None = None) -> SummaryStats:
    """Moments, quantiles and event frequencies of a sample (non-finite values dropped).

    ``events`` maps a name to a predicate applied to the finite values.
    """
    x = np.asarray([v for v in values if v is not None], dtype=np.float64)
    x = x[np.isfinite(x)]
    n = int(x.size)
    if n == 0:
        nan = float("nan")
        return SummaryStats(0, nan, nan, nan, {_qname(q): nan for q in QUANTILES})
    mean = float(np.mean(x))
    var = float(np.var(x, ddof=1)) if n > 1 else 0.0
    qs = np.quantile(x, QUANTILES)
    qs = np.maximum.accumulate(qs)
    probs, pse = {}, {}
    for name, pred in (events or {}).items():
        p = float(np.mean(pred(x)))
        probs[name] = p
        pse[name] = math.sqrt(p * (1 - p) / n)
    return SummaryStats(n_trials=n, mean=mean, variance=var, se=math.sqrt(var / n),
                        quantiles={_qname(q): float(v) for q, v in zip(QUANTILES, qs)},
                        probabilities=probs, probability_se=pse)


def column(records: Sequence[TrialRecord], name: str) -> np.ndarray:
    return np.array([r.stats.get(name, float("nan")) for r in records], dtype=np.float64)


@dataclass
class ExperimentResult:
    name: str
    params: dict
    records: list
    results: dict
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


# ---- runner ----------------------------------------------------------------------------

def trial_blocks(trial_ids: Iterable[int]) -> list[list[int]]:
    """Group trial ids into the aligned blocks used by the field generators."""
    groups: dict[int, list[int]] = {}
    for t in sorted(set(int(t) for t in trial_ids)):
        groups.setdefault(t // BLOCK, []).append(t)
    return [groups[b] for b in sorted(groups)]


def resolve_workers(workers: int) -> int:
    return max(1, os.cpu_count() or 1) if workers == 0 else max(1, int(workers))


def run_trials(block_fn: Callable[[list[int]], list[TrialRecord]], trial_ids: Iterable[int],
               workers: int = 1, pack: bool = False) -> list[TrialRecord]:
    """Run ``block_fn`` over aligned blocks; records come back sorted by trial id.

    With ``pack`` the blocks are merged into one task per worker, for block functions
    with a large per-call setup cost (uncached Gaussian factors).
    """
    blocks = trial_blocks(trial_ids)
    workers = resolve_workers(workers)
    if pack and blocks:
        per = -(-len(blocks) // workers)
        blocks = [sum(blocks[i:i + per], []) for i in range(0, len(blocks), per)]
    if workers == 1 or len(blocks) == 1:
        out = [block_fn(b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(block_fn, blocks))
    recs = [r for chunk in out for r in chunk]
    return sorted(recs, key=lambda r: r.trial_id)


@lru_cache(maxsize=4)
def shared_table(limit: int) -> PrimeTable:
    """Per-process prime table, so workers never receive a pickled copy."""
    return cached_sieve(limit)


def _skip(trial: int, u: float, reason: str) -> TrialRecord:
    # the reason only matters for debugging; records keep numeric stats so CSVs round-trip
    del reason
    return TrialRecord(trial, u, {"skipped": 1.0})


def _ids(n_trials: int, trial_ids) -> list[int]:
    if n_trials < 1:
        raise DomainError("n_trials must be at least 1")
    if trial_ids is None:
        return list(range(n_trials))
    ids = sorted(set(int(t) for t in trial_ids))
    if ids and not 0 <= ids[0] <= ids[-1] < n_trials:
        raise DomainError("trial ids must lie in 0..n_trials-1")
    return ids


def _merge(prior: Sequence[TrialRecord], new: Sequence[TrialRecord]) -> list[TrialRecord]:
    """Previously computed records plus new ones, one per trial id, in trial-id order."""
    seen = {r.trial_id: r for r in prior}
    seen.update({r.trial_id: r for r in new})
    return [seen[t] for t in sorted(seen)]


def _finish(name, params, records, aggregate) -> ExperimentResult:
    results, checks = aggregate(params, records)
    return ExperimentResult(name, params, records, results, checks)


def _skips(records) -> tuple[int, float]:
    n = sum(1 for r in records if r.stats.get("skipped", 0.0))
    frac = n / max(1, len(records))
    if frac > 0.01:
        warnings.warn(f"{n} of {len(records)} trials skipped", stacklevel=3)
    return n, frac


def _active(records):
    return [r for r in records if not r.stats.get("skipped", 0.0)]


def _check_height(T: float, h: float = 0.0) -> None:
    if not 10 < T <= MAX_HEIGHT:
        raise DomainError(f"T = {T} outside (10, 1e10]")
    if not 0 <= h <= 10:
        raise DomainError(f"h = {h} outside (0, 10]")


def grid_step(T: float) -> float:
    return min(0.05, math.pi / (4 * math.log(T / (2 * math.pi))))


def _sup_abs_z(a: float, b: float, T: float, cfg) -> float:
    n = int(math.ceil((b - a) / grid_step(T))) + 1
    return sampling.dense_sup(lambda x: np.abs(zmod.riemann_siegel_Z(x, cfg)), a, b, n)


# ---- extreme values on short intervals ----------------------------------------------------

def sup_block(params: dict, seed: int, trials: list[int]) -> list[TrialRecord]:
    T, h = params["T"], params["h"]
    cfg = zmod.ZetaEvalConfig(**params["zeta_cfg"])
    out = []
    for t in trials:
        u = trial_uniform(seed, t)
        c = u * T
        if c - h < 10.0:
            out.append(_skip(t, u, "below height 10"))
            continue
        try:
            zmax = _sup_abs_z(c - h, c + h, T, cfg)
            win = zmod.window_arg(c - h, c + h, cfg)
        except (NumericalError, zmod.BranchError) as exc:
            out.append(_skip(t, u, type(exc).__name__))
            continue
        rec = {"sup_re": math.log(zmax), "sup_im": win.sup_im, "inf_im": win.inf_im,
               "sup_abs_im": max(abs(win.sup_im), abs(win.inf_im)), "n_zeros": float(win.zeros.size)}
        if params.get("certify", True) and c >= 50 * (1 + h ** 4) and c <= T:
            b = sampling.certified_sup_bound_zeta_sq(c, h, T, zeta_cfg=cfg)
            rec["certified_sq"] = b.value
            rec["certified_ok"] = float(b.value >= zmax ** 2)
            rec["certified_advisory"] = float(b.advisory)
        out.append(TrialRecord(t, u, rec))
    return out


def sup_aggregate(params: dict, records) -> tuple[dict, dict]:
    T, eps = params["T"], params["eps"]
    L = loglog(T)
    act = _active(records)
    skipped, frac = _skips(records)
    inside = {"in_band": lambda x: (x >= 1 - eps) & (x <= 1 + eps)}
    res = {
        "loglogT": L,
        "sup_re_normalized": summarize(column(act, "sup_re") / L, inside).as_dict(),
        "sup_im_normalized": summarize(column(act, "sup_im") / L, inside).as_dict(),
        "sup_abs_im_normalized": summarize(column(act, "sup_abs_im") / L, inside).as_dict(),
        "inf_im_normalized": summarize(column(act, "inf_im") / L).as_dict(),
        "skipped": skipped,
        "skipped_fraction": frac,
    }
    cert = column(act, "certified_ok")
    cert = cert[np.isfinite(cert)]
    res["certified_trials"] = int(cert.size)
    res["certified_violations"] = int(np.sum(cert == 0))
    checks = {"certified_bound_holds": res["certified_violations"] == 0,
              "skips_below_1pct": frac <= 0.01}
    return res, checks


def sup_experiment(T: float, h: float, eps: float, n_trials: int, zeta_cfg=zmod.DEFAULT_CONFIG,
                   seed: int = 0, workers: int = 1, certify: bool = True,
                   trial_ids=None, prior=()) -> ExperimentResult:
    """Sup of log|zeta| and of +-Im log zeta over [UT - h, UT + h] for random U."""
    _check_height(T, h)
    if not eps > 0:
        raise DomainError("eps must be positive")
    params = {"T": float(T), "h": float(h), "eps": float(eps), "n_trials": int(n_trials),
              "zeta_cfg": asdict(zeta_cfg), "certify": bool(certify)}
    recs = run_trials(partial(sup_block, params, seed), _ids(n_trials, trial_ids), workers)
    return _finish("sup-experiment", params, _merge(prior, recs), sup_aggregate)


# ---- Selberg's central limit theorem --------------------------------------------------

def selberg_block(params: dict, seed: int, trials: list[int]) -> list[TrialRecord]:
    T = params["T"]
    cfg = zmod.ZetaEvalConfig(**params["zeta_cfg"])
    scale = math.sqrt(0.5 * loglog(T))
    out = []
    for t in trials:
        u = trial_uniform(seed, t)
        x = u * T
        if x < 10.0:
            out.append(_skip(t, u, "below height 10"))
            continue
        z = abs(float(zmod.riemann_siegel_Z(x, cfg)))
        if z == 0.0:
            out.append(_skip(t, u, "on a zero"))
            continue
        out.append(TrialRecord(t, u, {"log_abs_zeta": math.log(z), "normalized": math.log(z) / scale}))
    return out


def selberg_aggregate(params: dict, records) -> tuple[dict, dict]:
    act = _active(records)
    x = column(act, "normalized")
    x = x[np.isfinite(x)]
    skipped, frac = _skips(records)
    s = summarize(x)
    ks = sps.kstest(x, "norm") if x.size else None
    res = {"normalized": s.as_dict(), "ks_distance": float(ks.statistic) if ks else float("nan"),
           "ks_pvalue": float(ks.pvalue) if ks else float("nan"),
           "skipped": skipped, "skipped_fraction": frac}
    checks = {"mean_within_3se": abs(s.mean) <= 3 * s.se,
              "variance_in_band": 0.8 <= s.variance <= 1.2}
    return res, checks


def selberg_clt_check(T: float, n_trials: int, zeta_cfg=zmod.DEFAULT_CONFIG, seed: int = 0,
                      workers: int = 1,
                      trial_ids=None, prior=()) -> ExperimentResult:
    """log|zeta(1/2 + iUT)| / sqrt(log log T / 2) against the standard normal."""
    _check_height(T)
    params = {"T": float(T), "n_trials": int(n_trials), "zeta_cfg": asdict(zeta_cfg)}
    recs = run_trials(partial(selberg_block, params, seed), _ids(n_trials, trial_ids), workers)
    return _finish("selberg", params, _merge(prior, recs), selberg_aggregate)


# ---- tail probabilities of the smoothed prime sums ---------------------------------------

def tail_H(T: float) -> float:
    """H = log T (log log log T)^(1/2) / log log T, the averaging scale for the Im upper bound."""
    L = loglog(T)
    if L <= 1:
        raise DomainError("T too small: log log log T must be positive")
    return math.log(T) * math.sqrt(math.log(L)) / L


def tail_R(T: float) -> float:
    return math.exp(math.log(T) / (2 * loglog(T)))


def tails_block(params: dict, seed: int, trials: list[int]) -> list[TrialRecord]:
    T, d = params["T"], params["d"]
    kernel = kmod.default_smoothing_kernel(params["a"])
    H = tail_H(T)
    R = tail_R(T)
    table = shared_table(params["table_limit"])
    top = kernel.support_A * H
    p, lp = table.upto(math.exp(top))
    w1 = kernel.psi(lp / H)
    small = p <= R
    p3 = lp <= top / 2
    w3 = kernel.psi(2 * lp[p3] / H)
    out = []
    for t in trials:
        u = trial_uniform(seed, t)
        tau = u * T + d
        c = dirichlet_terms(p, 0.5, tau) * w1
        s1 = abs(np.sum(c[small]))
        s2 = abs(np.sum(c[~small]))
        s3 = 0.5 * abs(np.sum(dirichlet_terms(p[p3], 1.0, tau, 2) * w3))
        out.append(TrialRecord(t, u, {"sum1": s1, "sum2": s2, "sum3": s3}))
    return out


def tails_aggregate(params: dict, records) -> tuple[dict, dict]:
    T = params["T"]
    L = loglog(T)
    res = {"H": tail_H(T), "R": tail_R(T), "loglogT": L}
    for i, key in enumerate(("sum1", "sum2", "sum3"), start=1):
        b = params[f"B{i}"]
        s = summarize(column(records, key), {"exceeds": lambda x, b=b: x >= b * L})
        res[f"P{i}"] = s.probabilities["exceeds"]
        res[f"P{i}_se"] = s.probability_se["exceeds"]
        res[key] = s.as_dict()
    pred = math.log(T) ** (-1 - math.log(params["B1"]))
    res["P1_prediction_shape"] = pred
    kernel = kmod.default_smoothing_kernel(params["a"])
    table = shared_table(params["table_limit"])
    top = kernel.support_A * tail_H(T) / 2
    _, lp = table.upto(math.exp(top))
    res["P3_statistic_ceiling"] = 0.5 * float(np.sum(np.exp(-lp)))
    sums3 = column(records, "sum3")
    checks = {"P1_below_10x_prediction": res["P1"] <= 10 * pred,
              "P3_statistic_below_ceiling": bool(np.all(sums3 <= res["P3_statistic_ceiling"] + 1e-12))}
    return res, checks


def tail_probabilities(T: float, h: float, d: float, B1: float, B2: float, B3: float, kernel,
                       table: PrimeTable, n_trials: int, seed: int = 0, workers: int = 1,
                       trial_ids=None, prior=()) -> ExperimentResult:
    """Frequencies of the three threshold events for the smoothed prime sums at UT + d."""
    _check_height(T, h)
    if abs(d) > 2 * h:
        raise DomainError("d must lie in [-2h, 2h]")
    if min(B1, B2, B3) <= 0:
        raise DomainError("B1, B2, B3 must be positive")
    H = tail_H(T)
    table.require(math.exp(kernel.support_A * H), "e^(A H)")
    params = {"T": float(T), "h": float(h), "d": float(d), "B1": float(B1), "B2": float(B2),
              "B3": float(B3), "a": kernel.alpha_support, "table_limit": table.limit,
              "n_trials": int(n_trials)}
    recs = run_trials(partial(tails_block, params, seed), _ids(n_trials, trial_ids), workers)
    return _finish("tails", params, _merge(prior, recs), tails_aggregate)


# ---- mean value estimate for Dirichlet polynomials -----------------------------------------

@dataclass(frozen=True)
class MomentCheck:
    ratio: float
    lhs: float
    rhs: float
    strict_precondition: bool
    quadrature_error: float


def _dirichlet_poly(t: np.ndarray, primes: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    lp = np.log(primes.astype(np.float64))
    out = np.zeros(t.shape, dtype=np.complex128)
    for p, l, a in zip(primes, lp, coeffs):
        out += a * np.exp(-0.5 * l) * np.exp(-1j * l * t)
    return out


def _moment_integral(T: float, primes, coeffs, k: int, nodes: int) -> float:
    x, w = np.polynomial.legendre.leggauss(nodes)
    freq = 2 * k * math.log(float(primes.max())) if primes.size else 1.0
    panels = max(1, int(math.ceil(T * freq / (2 * math.pi))))
    width = T / panels
    total = 0.0
    for s in range(0, panels, 2000):
        left = T + width * np.arange(s, min(panels, s + 2000))
        t = (left[:, None] + width * (x[None, :] + 1) / 2).ravel()
        v = np.abs(_dirichlet_poly(t, primes, coeffs)) ** (2 * k)
        total += float(np.sum(v.reshape(-1, nodes) * w[None, :]) * width / 2)
    return total


def moment_bound_check(T: float, x: float, k: int, coeffs=None, table: PrimeTable | None = None
                       ) -> MomentCheck:
    """Integral over [T, 2T] of |sum_{p<=x} a(p) p^{-1/2-it}|^{2k}, divided by T k! (sum |a(p)|^2/p)^k.

    ``coeffs`` is a callable on primes, a mapping prime -> a(p), or None for a = 1.
    The classical hypothesis x^k <= T/log T is reported in ``strict_precondition``;
    only x^k <= T is enforced.
    """
    if int(k) != k or k < 0:
        raise DomainError("k must be a nonnegative integer")
    k = int(k)
    if k == 0:
        return MomentCheck(1.0, float(T), float(T), True, 0.0)
    if not 2 <= x <= T:
        raise DomainError("need 2 <= x <= T")
    if x ** k > T:
        raise DomainError(f"x^k = {x ** k:.6g} exceeds T = {T:g}")
    table = table or shared_table(max(100, int(x) + 1))
    table.require(x)
    primes, _ = table.upto(x)
    if coeffs is None:
        a = np.ones(primes.size, dtype=np.complex128)
    elif callable(coeffs):
        a = np.array([coeffs(int(p)) for p in primes], dtype=np.complex128)
    else:
        a = np.array([coeffs.get(int(p), 0.0) for p in primes], dtype=np.complex128)
    lhs = _moment_integral(T, primes, a, k, 24)
    check = _moment_integral(T, primes, a, k, 32)
    rhs = T * math.factorial(k) * math.fsum(np.abs(a) ** 2 / primes) ** k
    strict = x ** k <= T / math.log(T)
    return MomentCheck(ratio=lhs / rhs, lhs=lhs, rhs=rhs, strict_precondition=strict,
                       quadrature_error=abs(lhs - check))


# ---- Fourier-Laplace comparisons ---------------------------------------------------------

def _laplace_exponent(lam, mu, f: np.ndarray, k: int, l: int) -> complex:
    return complex(np.sum(lam * f[k, 1:] + mu * f[l, 1:]))


def laplace_block(params: dict, seed: int, trials: list[int]) -> list[TrialRecord]:
    cfg = _cfg_from(params)
    table = shared_table(params["table_limit"])
    lam = np.array(params["lam_re"]) + 1j * np.array(params["lam_im"])
    mu = np.array(params["mu_re"]) + 1j * np.array(params["mu_im"])
    k, l = params["k"], params["l"]
    vs = sur.v_fields(cfg, table, seed, trials)
    gs = sur.g_fields(cfg, seed, trials) if params.get("g_mc") else {}
    out = []
    for t in trials:
        u = trial_uniform(seed, t)
        s0 = sur.truncate(sur.s_field(cfg, u, table), cfg)
        es = np.exp(_laplace_exponent(lam, mu, s0.values, k, l))
        ev = np.exp(_laplace_exponent(lam, mu, vs[t].values, k, l))
        rec = {"S0_re": es.real, "S0_im": es.imag, "V_re": ev.real, "V_im": ev.imag}
        if t in gs:
            eg = np.exp(_laplace_exponent(lam, mu, gs[t].values, k, l))
            rec.update({"G_re": eg.real, "G_im": eg.imag})
        out.append(TrialRecord(t, u, rec))
    return out


def _complex_mean(records, prefix: str) -> tuple[complex, float]:
    re, im = column(records, prefix + "_re"), column(records, prefix + "_im")
    n = re.size
    se = math.sqrt((np.var(re, ddof=1) + np.var(im, ddof=1)) / n) if n > 1 else float("nan")
    return complex(np.mean(re), np.mean(im)), se


def laplace_aggregate(params: dict, records) -> tuple[dict, dict]:
    cfg = _cfg_from(params)
    lam = np.array(params["lam_re"]) + 1j * np.array(params["lam_im"])
    mu = np.array(params["mu_re"]) + 1j * np.array(params["mu_im"])
    eg = sur.gaussian_laplace_closed_form(cfg, params["k"], params["l"], lam, mu)
    es, se_s = _complex_mean(records, "S0")
    ev, se_v = _complex_mean(records, "V")
    res = {"E_S0": es, "E_V": ev, "E_G_closed": eg, "se_S0": se_s, "se_V": se_v,
           "diff_S0_V": abs(es - ev), "diff_V_G": abs(ev - eg),
           "combined_se_S0_V": math.hypot(se_s, se_v)}
    checks = {"V_vs_G_within_3se_plus_0.05": res["diff_V_G"] <= 3 * se_v + 0.05}
    if params.get("g_mc"):
        egm, se_g = _complex_mean(records, "G")
        res.update({"E_G_mc": egm, "se_G_mc": se_g, "diff_Gmc_closed": abs(egm - eg)})
        checks["G_mc_within_3se"] = abs(egm - eg) <= 3 * se_g
    return res, checks


def _cfg_from(params: dict) -> sur.SurrogateConfig:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sur.derive_config(params["T"], params["h"], params["delta"], params["K"],
                                 params["kappa"], params.get("H"))


def _cfg_params(cfg: sur.SurrogateConfig) -> dict:
    d = cfg.as_dict()
    if not cfg.H_override:
        d["H"] = None
    return d


def laplace_compare(cfg: sur.SurrogateConfig, k: int, l: int, lam, mu, n_trials: int,
                    table: PrimeTable, seed: int = 0, workers: int = 1, g_mc: bool = False,
                    check_regime: bool = True,
                    trial_ids=None, prior=()) -> ExperimentResult:
    """Monte Carlo Laplace transforms of (S0, V) over bands m = 1..K-1 against the Gaussian closed form."""
    lam = np.asarray(lam, dtype=np.complex128)
    mu = np.asarray(mu, dtype=np.complex128)
    if lam.shape != (cfg.K - 1,) or mu.shape != (cfg.K - 1,):
        raise DomainError(f"lambda and mu need K-1 = {cfg.K - 1} entries")
    if not (0 <= k < cfg.H and 0 <= l < cfg.H):
        raise DomainError(f"k and l must lie in 0..{cfg.H - 1}")
    if check_regime:
        logT = math.log(cfg.T)
        cap = min(logT ** (cfg.delta / 100), logT ** (1 / (20 * cfg.K)))
        worst = float(max(np.max(np.abs(lam)), np.max(np.abs(mu))))
        if worst > cap:
            raise DomainError(f"|lambda|, |mu| up to {worst:.4g} exceed the comparison regime bound {cap:.4g}")
    table.require(math.exp(cfg.H), "e^H")
    params = dict(_cfg_params(cfg), k=int(k), l=int(l), lam_re=lam.real.tolist(), lam_im=lam.imag.tolist(),
                  mu_re=mu.real.tolist(), mu_im=mu.imag.tolist(), n_trials=int(n_trials),
                  table_limit=table.limit, g_mc=bool(g_mc))
    recs = run_trials(partial(laplace_block, params, seed), _ids(n_trials, trial_ids), workers)
    return _finish("laplace-compare", params, _merge(prior, recs), laplace_aggregate)


# ---- second moment of the counting variable J ----------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Smooth nonnegative bump supported in [offset, offset + width], zero on the negative axis."""
    width: float = 1.0
    offset: float = 0.0
    samples: int = 1025

    __test__ = False            # not a pytest class

    def __post_init__(self):
        if not self.width > 0:
            raise DomainError("test function width must be positive")
        if self.offset < 0:
            raise DomainError("test function must vanish on the negative axis (offset >= 0)")

    @property
    def support(self) -> tuple[float, float]:
        return (self.offset, self.offset + self.width)

    def __call__(self, t):
        half = self.width / 2
        return kmod.bump(np.asarray(t, dtype=np.float64) - self.offset - half, half)

    def table(self) -> tuple[np.ndarray, np.ndarray]:
        t = np.linspace(self.offset - 0.1 * self.width, self.offset + 1.1 * self.width, self.samples)
        return t, self(t)

    def validate(self) -> bool:
        t, v = self.table()
        return bool(np.all(v >= 0) and np.any(v > 0) and np.all(v[t <= 0] == 0)
                    and np.all(v[(t < self.offset) | (t > self.offset + self.width)] == 0))


def threshold_x(K: int, H: int, nu: float) -> float:
    return math.log(H) * math.sqrt(1 - nu) / K


def _j_stat(values: np.ndarray, x: float, fn: TestFunction) -> tuple[float, float]:
    prod = np.prod(fn(values[:, 1:] - x), axis=1)
    J = float(np.sum(prod))
    witness = 1.0
    if J > 0:
        k = int(np.argmax(prod))
        witness = float(np.sum(values[k, 1:]) >= (values.shape[1] - 1) * x)
    return J, witness


def second_moment_block(params: dict, seed: int, trials: list[int]) -> list[TrialRecord]:
    cfg = _cfg_from(params)
    fn = TestFunction(params["width"], params["offset"])
    x = threshold_x(cfg.K, cfg.H, params["nu"])
    out = []
    if params["field"] == "G":
        fields = sur.g_fields(cfg, seed, trials)
        for t in trials:
            J, w = _j_stat(fields[t].values, x, fn)
            out.append(TrialRecord(t, trial_uniform(seed, t), {"J": J, "witness_ok": w,
                                                     "max_row_sum": float(fields[t].values[:, 1:].sum(1).max())}))
    else:
        table = shared_table(params["table_limit"])
        for t in trials:
            u = trial_uniform(seed, t)
            s = sur.s_field(cfg, u, table)
            s0 = sur.truncate(s, cfg)
            J, _ = _j_stat(s0.values, x, fn)
            w = 1.0
            if J > 0:
                k = int(np.argmax(np.prod(fn(s0.values[:, 1:] - x), axis=1)))
                w = float(np.sum(s.values[k, 1:]) >= (cfg.K - 1) * x)
            out.append(TrialRecord(t, u, {"J": J, "witness_ok": w,
                                          "max_row_sum": float(s.values[:, 1:].sum(1).max())}))
    return out


def pz_statistics(J: np.ndarray) -> dict:
    """E J, E J^2, P[J > 0] and the Paley-Zygmund ratio with delta-method standard errors."""
    J = np.asarray(J, dtype=np.float64)
    n = J.size
    m1, m2 = float(np.mean(J)), float(np.mean(J ** 2))
    p = float(np.mean(J > 0))
    ratio = m1 * m1 / m2 if m2 > 0 else float("nan")
    if n > 1 and m2 > 0:
        cov = np.cov(np.vstack([J, J ** 2]), ddof=1) / n
        g = np.array([2 * m1 / m2, -m1 * m1 / m2 ** 2])
        ratio_se = float(math.sqrt(max(0.0, g @ cov @ g)))
    else:
        ratio_se = float("nan")
    p_se = math.sqrt(p * (1 - p) / n) if n else float("nan")
    return {"EJ": m1, "EJ2": m2, "PJpos": p, "pz_ratio": ratio, "PJpos_se": p_se, "pz_ratio_se": ratio_se}


def second_moment_aggregate(params: dict, records) -> tuple[dict, dict]:
    cfg = _cfg_from(params)
    J = column(records, "J")
    res = pz_statistics(J)
    x = threshold_x(cfg.K, cfg.H, params["nu"])
    res.update({"x": x, "H": cfg.H, "K": cfg.K, "J": summarize(J).as_dict()})
    se = math.hypot(res["PJpos_se"], res["pz_ratio_se"]) if math.isfinite(res["pz_ratio_se"]) else 0.0
    res["combined_se"] = se
    wit = column(records, "witness_ok")
    checks = {"paley_zygmund_consistent": (not math.isfinite(res["pz_ratio"]))
              or res["PJpos"] >= res["pz_ratio"] - 3 * se,
              "witness_always_found": bool(np.all(wit == 1.0))}
    return res, checks


def second_moment_J(field_kind: str, cfg: sur.SurrogateConfig, nu: float, test_fn: TestFunction,
                    n_trials: int, table: PrimeTable | None = None, seed: int = 0, workers: int = 1,
                    trial_ids=None, prior=()) -> ExperimentResult:
    """J = sum_k prod_{m=1}^{K-1} f(field(k, m) - x) with x = log H sqrt(1 - nu)/K."""
    if field_kind not in ("S0", "G"):
        raise DomainError("field kind must be S0 or G")
    if not 0 < nu < 0.5:
        raise DomainError(f"nu = {nu} outside (0, 1/2)")
    if not test_fn.validate():
        raise DomainError("test function fails its shape checks")
    params = dict(_cfg_params(cfg), field=field_kind, nu=float(nu), width=test_fn.width,
                  offset=test_fn.offset, n_trials=int(n_trials))
    if field_kind == "S0":
        if table is None:
            raise DomainError("an S0 run needs a prime table")
        table.require(math.exp(cfg.H), "e^H")
        params["table_limit"] = table.limit
    pack = field_kind == "G" and cfg.H > sur.DENSE_H
    recs = run_trials(partial(second_moment_block, params, seed), _ids(n_trials, trial_ids), workers, pack)
    return _finish("second-moment", params, _merge(prior, recs), second_moment_aggregate)


# ---- the lower-bound chain --------------------------------------------------------------

def lower_bound_block(params: dict, seed: int, trials: list[int]) -> list[TrialRecord]:
    cfg = _cfg_from(params)
    zcfg = zmod.ZetaEvalConfig(**params["zeta_cfg"])
    table = shared_table(params["table_limit"])
    T, h = cfg.T, cfg.h
    out = []
    for t in trials:
        u = trial_uniform(seed, t)
        c = u * T
        if c - h < 10.0:
            out.append(_skip(t, u, "below height 10"))
            continue
        s = sur.s_field(cfg, u, table).values
        p2 = sur.small_prime_term(cfg, u)
        upper = s[:, 1:].sum(axis=1)
        notbeginning = float(upper.max())
        beginning = float(s[:, 0].min())
        sharp = float((s.sum(axis=1) + p2).max())
        try:
            if cfg.kappa == 1:
                sup_zeta = math.log(_sup_abs_z(c - h, c + h, T, zcfg))
            else:
                win = zmod.window_arg(c - h, c + h, zcfg)
                sup_zeta = win.sup_im if cfg.kappa == -1j else -win.inf_im
        except (NumericalError, zmod.BranchError) as exc:
            out.append(_skip(t, u, type(exc).__name__))
            continue
        comb = notbeginning + beginning
        out.append(TrialRecord(t, u, {
            "notbeginning": notbeginning, "beginning": beginning, "combination": comb,
            "sharp_sup": sharp, "p2_max_abs": float(np.max(np.abs(p2))), "sup_zeta": sup_zeta,
            "residual": sup_zeta - comb}))
    return out


def lower_bound_aggregate(params: dict, records) -> tuple[dict, dict]:
    cfg = _cfg_from(params)
    L = loglog(cfg.T)
    act = _active(records)
    skipped, frac = _skips(records)
    floor = -2 / math.sqrt(cfg.K) * L
    eps = params["eps"]
    res = {
        "loglogT": L,
        "notbeginning": summarize(column(act, "notbeginning")).as_dict(),
        "beginning": summarize(column(act, "beginning"), {"above_floor": lambda x: x >= floor}).as_dict(),
        "combination": summarize(column(act, "combination")).as_dict(),
        "sup_zeta": summarize(column(act, "sup_zeta") / L,
                              {"above_1_minus_eps": lambda x: x >= 1 - eps}).as_dict(),
        "residual": summarize(column(act, "residual")).as_dict(),
        "skipped": skipped, "skipped_fraction": frac, "beginning_floor": floor,
    }
    r = column(act, "residual")
    r = r[np.isfinite(r)]
    res["residual_constant"] = float(-np.quantile(r, 0.01) / math.sqrt(L)) if r.size else float("nan")
    slack = column(act, "sharp_sup") + column(act, "p2_max_abs") - column(act, "combination")
    checks = {"combination_below_sharp_plus_p2": bool(np.all(slack >= -1e-9))}
    return res, checks


def lower_bound_pipeline(cfg: sur.SurrogateConfig, eps: float, n_trials: int, table: PrimeTable,
                         zeta_cfg=zmod.DEFAULT_CONFIG, seed: int = 0, workers: int = 1,
                         trial_ids=None, prior=()) -> ExperimentResult:
    """Band statistics of the prime sums against the observed sup of Re(kappa log zeta)."""
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    _check_height(cfg.T, cfg.h)
    table.require(math.exp(cfg.H), "e^H")
    params = dict(_cfg_params(cfg), eps=float(eps), n_trials=int(n_trials), table_limit=table.limit,
                  zeta_cfg=asdict(zeta_cfg))
    recs = run_trials(partial(lower_bound_block, params, seed), _ids(n_trials, trial_ids), workers)
    return _finish("lower-bound", params, _merge(prior, recs), lower_bound_aggregate)


# ---- registry used by the command line --------------------------------------------------

AGGREGATORS = {
    "sup-experiment": (sup_block, sup_aggregate),
    "selberg": (selberg_block, selberg_aggregate),
    "tails": (tails_block, tails_aggregate),
    "laplace-compare": (laplace_block, laplace_aggregate),
    "second-moment": (second_moment_block, second_moment_aggregate),
    "lower-bound": (lower_bound_block, lower_bound_aggregate),
}


# ---- covariance structure of V and G ------------------------------------------------------

def _moment_check(products: np.ndarray, target: float) -> dict:
    n = products.size
    mean = float(np.mean(products))
    se = float(np.std(products, ddof=1) / math.sqrt(n))
    return {"empirical": mean, "target": float(target), "se": se,
            "z": (mean - target) / se if se > 0 else float("nan")}


def covariance_check(cfg: sur.SurrogateConfig, table: PrimeTable, n_v: int = 100_000,
                     n_g: int = 10_000, seed: int = 0, chunk: int = 4096) -> ExperimentResult:
    """Empirical second moments of V and G against their exact values.

    Checks Var V(0, m) against the band sum of 1/(2p), the telescoping identity
    sum_m I(x_m, x_{m+1}, 0) = log H, and E G(0, m) G(j, m) against the covariance
    row for lags j in {0, 1, H/2, H-1}.
    """
    if n_v < 2 or n_g < 2:
        raise DomainError("need at least two draws of each field")
    table.require(math.exp(cfg.H), "e^H")
    chunk = max(BLOCK, chunk - chunk % BLOCK)
    exact_v = sur.band_variance(cfg, table)
    v_sq = np.empty((n_v, cfg.K))
    for lo in range(0, n_v, chunk):
        ids = range(lo, min(n_v, lo + chunk))
        fs = sur.v_fields(cfg, table, seed, ids)
        v_sq[lo:lo + len(ids)] = np.array([fs[t].values[0] ** 2 for t in ids])
    lags = sorted({0, 1, cfg.H // 2, cfg.H - 1})
    prods = {(m, j): np.empty(n_g) for m in range(cfg.K) for j in lags}
    for lo in range(0, n_g, chunk):
        ids = range(lo, min(n_g, lo + chunk))
        fs = sur.g_fields(cfg, seed, ids)
        block = np.stack([fs[t].values for t in ids])
        for (m, j), arr in prods.items():
            arr[lo:lo + len(ids)] = block[:, 0, m] * block[:, j, m]
    telescoped = math.fsum(sur.cov_I_log(cfg.log_edges[m], cfg.log_edges[m + 1], 0.0) for m in range(cfg.K))
    res = {"V_variance": [_moment_check(v_sq[:, m], exact_v[m]) for m in range(cfg.K)],
           "telescoping": {"sum": telescoped, "log_H": math.log(cfg.H),
                           "error": abs(telescoped - math.log(cfg.H))}}
    g = {}
    for m in range(cfg.K):
        row = sur.column_covariance(cfg, m)[0]
        g[str(m)] = {str(j): _moment_check(prods[(m, j)], row[j]) for j in lags}
    res["G_covariance"] = g
    checks = {
        "V_variance_within_3se": all(abs(c["z"]) <= 3 for c in res["V_variance"]),
        "telescoping_1e-12": res["telescoping"]["error"] <= 1e-12,
        "G_covariance_within_3se": all(abs(c["z"]) <= 3 for col in g.values() for c in col.values()),
    }
    params = dict(_cfg_params(cfg), n_v=int(n_v), n_g=int(n_g), table_limit=table.limit)
    return ExperimentResult("cov-check", params, [], res, checks)
