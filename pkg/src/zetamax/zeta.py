"""Evaluation of zeta on and near the critical line.

Riemann-Siegel Z(t), Euler-Maclaurin zeta(s), the continuous branch of
Im log zeta(1/2+it) (by argument unwinding or by zero counting), the zero
counting function N(t) and the fluctuation Delta(t).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq
from scipy.special import bernoulli, loggamma

from .errors import BranchError, DomainError, MiscountError, NumericalError, PrecisionError

TWO_PI = 2.0 * math.pi
LOG_PI = math.log(math.pi)

ZERO_EXCLUSION = 1e-6      # distance to a zero ordinate treated as "on the zero"
MIN_MODULUS = 1e-8         # unwinding aborts if |zeta| drops below this on the path
EM_MAX_HEIGHT = 1e6
EM_ANCHOR_HEIGHT = 3e5     # above this, anchors use the approximate functional equation
COUNT_MAX_HEIGHT = 1e6


@dataclass(frozen=True)
class ZetaEvalConfig:
    rs_correction_terms: int = 1
    em_terms: int = 30
    arg_step_cap: float = 0.05

    def __post_init__(self):
        if not 0 <= self.rs_correction_terms <= 4:
            raise DomainError("rs_correction_terms must be in 0..4")
        if not 2 <= self.em_terms <= 30:
            raise DomainError("em_terms must be in 2..30")
        if not self.arg_step_cap > 0:
            raise DomainError("arg_step_cap must be positive")


DEFAULT_CONFIG = ZetaEvalConfig()


@dataclass(frozen=True)
class ArgPathResult:
    t: float
    im_log_zeta: float
    path_steps: int
    min_modulus_on_path: float


# ---- theta ------------------------------------------------------------------

def theta_rs(t):
    """Riemann-Siegel theta, Im log Gamma(1/4 + it/2) - (t/2) log pi.

    Stirling series through t^-7 for t >= 10, complex log-gamma below.
    """
    ta = np.asarray(t, dtype=np.float64)
    if np.any(ta < 1.0):
        raise DomainError("theta_rs requires t >= 1")
    out = np.empty_like(ta)
    big = ta >= 10.0
    x = ta[big]
    if x.size:
        inv = 1.0 / x
        inv2 = inv * inv
        out[big] = (0.5 * x * np.log(x / TWO_PI) - 0.5 * x - math.pi / 8
                    + inv * (1 / 48 + inv2 * (7 / 5760 + inv2 * (31 / 80640 + inv2 * 127 / 430080))))
    x = ta[~big]
    if x.size:
        out[~big] = loggamma(0.25 + 0.5j * x).imag - 0.5 * x * LOG_PI
    return out if np.ndim(t) else float(out)


def theta_derivative(t: float) -> float:
    return 0.5 * math.log(t / TWO_PI) + 1.0 / (48.0 * t * t)


def gram_point(n: int) -> float:
    """Solve theta(g) = n*pi by Newton iteration (n >= -1)."""
    target = n * math.pi
    g = max(TWO_PI * math.exp(1 + lambertw_approx((8 * n + 1) / (8 * math.e))), 10.0)
    for _ in range(60):
        step = (theta_rs(g) - target) / theta_derivative(g)
        g -= step
        if abs(step) < 1e-13 * g:
            break
    return g


def lambertw_approx(x: float) -> float:
    """Principal Lambert W for x > 0 by Newton (enough for a Gram-point start)."""
    w = math.log1p(x)
    for _ in range(50):
        ew = math.exp(w)
        d = (w * ew - x) / (ew * (w + 1))
        w -= d
        if abs(d) < 1e-15:
            break
    return w


def gram_points(t_lo: float, t_hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Indices and locations of the Gram points in [t_lo, t_hi] (t_lo >= 10)."""
    n0 = max(math.ceil(theta_rs(max(t_lo, 10.0)) / math.pi), -1)
    n1 = math.floor(theta_rs(t_hi) / math.pi)
    if n1 < n0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    ns = np.arange(n0, n1 + 1, dtype=np.int64)
    g = np.array([gram_point(int(n0))])
    # vectorised Newton from the asymptotic spacing
    approx = np.empty(ns.size)
    approx[0] = g[0]
    if ns.size > 1:
        x = TWO_PI * np.exp(1 + _lambertw_vec((8 * ns[1:] + 1) / (8 * math.e)))
        approx[1:] = np.maximum(x, 10.0)
    for _ in range(60):
        th = theta_rs(approx)
        step = (th - ns * math.pi) / (0.5 * np.log(approx / TWO_PI))
        approx -= step
        if np.max(np.abs(step) / approx) < 1e-14:
            break
    keep = (approx >= t_lo) & (approx <= t_hi)
    return ns[keep], approx[keep]


def _lambertw_vec(x: np.ndarray) -> np.ndarray:
    w = np.log1p(x)
    for _ in range(60):
        ew = np.exp(w)
        d = (w * ew - x) / (ew * (w + 1))
        w -= d
        if np.max(np.abs(d)) < 1e-15:
            break
    return w


# ---- Riemann-Siegel ----------------------------------------------------------

@lru_cache(maxsize=1)
def _psi_taylor() -> np.ndarray:
    """Taylor coefficients about p = 1/2 of cos(2pi(p^2-p-1/16))/cos(2pi p).

    The quotient is entire, so the coefficients come from a discrete Cauchy
    integral on the unit circle around 1/2.
    """
    n = 64
    z = np.exp(2j * math.pi * np.arange(n) / n)
    p = 0.5 + z
    vals = np.cos(TWO_PI * (p * p - p - 1 / 16)) / np.cos(TWO_PI * p)
    c = np.fft.fft(vals) / n
    return c.real[:48].copy()


@lru_cache(maxsize=1)
def _psi_derivs() -> list[np.ndarray]:
    c = _psi_taylor()
    return [c if k == 0 else P.polyder(c, k) for k in range(13)]


def _rs_corrections(p: np.ndarray, nterms: int) -> list[np.ndarray]:
    """Riemann-Siegel correction coefficients C_0..C_nterms at fractional part p."""
    z = p - 0.5
    d = _psi_derivs()
    D = lambda k: P.polyval(z, d[k])
    pi2 = math.pi ** 2
    out = [D(0)]
    if nterms >= 1:
        out.append(-D(3) / (96 * pi2))
    if nterms >= 2:
        out.append(D(2) / (64 * pi2) + D(6) / (18432 * pi2 ** 2))
    if nterms >= 3:
        out.append(-D(1) / (64 * pi2) - D(5) / (3840 * pi2 ** 2) - D(9) / (5308416 * pi2 ** 3))
    if nterms >= 4:
        out.append(D(0) / (128 * pi2) + 19 * D(4) / (24576 * pi2 ** 2)
                   + 11 * D(8) / (5898240 * pi2 ** 3) + D(12) / (2038431744 * pi2 ** 4))
    return out


def rs_term_count(t: float) -> int:
    return int(math.floor(math.sqrt(t / TWO_PI)))


def riemann_siegel_Z(t, cfg: ZetaEvalConfig = DEFAULT_CONFIG):
    """Hardy's Z(t) by the Riemann-Siegel formula (t >= 10, vectorised over t)."""
    ta = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if ta.size and np.min(ta) < 10.0:
        raise DomainError("riemann_siegel_Z requires t >= 10; use zeta_euler_maclaurin below")
    out = np.empty_like(ta)
    a = np.sqrt(ta / TWO_PI)
    N = np.floor(a).astype(np.int64)
    th = theta_rs(ta)
    order = np.argsort(N, kind="stable")
    # group by term count; block the outer product to bound memory
    start = 0
    while start < ta.size:
        n_max = int(N[order[start]])
        stop = start
        while stop < ta.size and N[order[stop]] == n_max:
            stop += 1
        idx = order[start:stop]
        k = np.arange(1, n_max + 1)
        lk = np.log(k)
        w = 1.0 / np.sqrt(k)
        blk = max(1, 4_000_000 // max(n_max, 1))
        for b in range(0, idx.size, blk):
            ii = idx[b:b + blk]
            ph = th[ii, None] - ta[ii, None] * lk[None, :]
            out[ii] = 2.0 * (np.cos(ph) @ w)
        start = stop
    p = a - N
    corr = _rs_corrections(p, cfg.rs_correction_terms)
    rem = np.zeros_like(ta)
    for j, cj in enumerate(corr):
        rem += cj * a ** (-j)
    sign = np.where(N % 2 == 1, 1.0, -1.0)      # (-1)^(N-1)
    out += sign * rem / np.sqrt(a)
    return out if np.ndim(t) else float(out[0])


def rs_error_budget(t, nterms: int = 1):
    """Size of the Riemann-Siegel remainder after ``nterms`` corrections.

    Uses Gabcke's published constants for 0 and 1 corrections (t >= 200)
    and a 10x inflated version below that height; higher orders reuse the
    one-correction bound, which they only improve on.
    """
    t = np.asarray(t, dtype=np.float64)
    if nterms == 0:
        c, e = 0.127, -0.75
    else:
        c, e = 0.061, -1.25
    c = np.where(t >= 200.0, c, 10 * c)
    return c * t ** e


# ---- Euler-Maclaurin -----------------------------------------------------------

@lru_cache(maxsize=1)
def _bernoulli_ratios() -> np.ndarray:
    """B_{2j}/(2j)! for j = 0..32."""
    b = bernoulli(64)
    j = np.arange(33)
    return np.array([b[2 * i] / math.factorial(2 * i) for i in j])


def _em_plan(s: complex, m: int, tol: float) -> tuple[int, float]:
    """Truncation N for Euler-Maclaurin with m correction terms, and its bound."""
    sigma = s.real
    br = _bernoulli_ratios()
    logprod = sum(math.log(abs(s + i)) for i in range(2 * m + 1))
    logc = math.log(abs(br[m + 1])) + logprod + math.log(abs(s + 2 * m + 1) / (sigma + 2 * m + 1))
    expo = sigma + 2 * m + 1
    n = math.exp((logc - math.log(tol)) / expo)
    n = max(int(math.ceil(n)), 10)
    bound = math.exp(logc - expo * math.log(n))
    return n, bound


EM_MAX_TERMS = 20_000_000


def zeta_euler_maclaurin(s, cfg: ZetaEvalConfig = DEFAULT_CONFIG, tol: float = 1e-10):
    """zeta(s) for Re s >= 1/2, |Im s| <= 10^6 by Euler-Maclaurin summation.

    The truncation point is chosen per s from the remainder bound so the
    result meets ``tol``; if that would need more than EM_MAX_TERMS terms a
    PrecisionError carries the bound actually achievable.
    """
    sa = np.atleast_1d(np.asarray(s, dtype=np.complex128))
    out = np.empty(sa.shape, dtype=np.complex128)
    m = cfg.em_terms
    br = _bernoulli_ratios()
    for i, si in enumerate(sa):
        si = complex(si)
        if si == 1:
            raise DomainError("zeta has a pole at s = 1")
        if si.real < 0.5 - 1e-12:
            raise DomainError("zeta_euler_maclaurin requires Re s >= 1/2")
        if abs(si.imag) > EM_MAX_HEIGHT:
            raise DomainError("zeta_euler_maclaurin requires |Im s| <= 1e6")
        n, bound = _em_plan(si, m, tol)
        if n > EM_MAX_TERMS:
            achieved = float(bound * (n / EM_MAX_TERMS) ** (si.real + 2 * m + 1))
            raise PrecisionError(f"accuracy {tol:g} needs {n} terms at s = {si}", achieved)
        ln = np.log(np.arange(1, n, dtype=np.float64))
        head = np.sum(np.exp(-si * ln))
        logN = math.log(n)
        nps = np.exp(-si * logN)
        total = head + n * nps / (si - 1) + 0.5 * nps
        # tail corrections: B_2j/(2j)! * s(s+1)...(s+2j-2) * N^{-s-2j+1}
        q = si * nps / n
        for j in range(1, m + 1):
            total += br[j] * q
            q *= (si + 2 * j - 1) * (si + 2 * j) / (n * n)
        out[i] = total
    return out if np.ndim(s) else complex(out[0])


# ---- approximate functional equation (anchoring at large heights) -----------

def _log_chi(s: np.ndarray) -> np.ndarray:
    """log of chi(s) in zeta(s) = chi(s) zeta(1-s), for Im s > 0."""
    z = math.pi * s / 2
    logsin = -1j * z + np.log1p(-np.exp(2j * z)) - math.log(2) + 0.5j * math.pi
    return s * math.log(2) + (s - 1) * LOG_PI + logsin + loggamma(1 - s)


def zeta_afe(s) -> np.ndarray:
    """Unsmoothed approximate functional equation, for t well above 10^4.

    Accuracy is roughly (t/2pi)^(-sigma/2); only used where an argument
    estimate good to a fraction of pi suffices.
    """
    sa = np.atleast_1d(np.asarray(s, dtype=np.complex128))
    t = float(np.max(sa.imag))
    n = int(math.sqrt(t / TWO_PI))
    ln = np.log(np.arange(1, n + 1, dtype=np.float64))
    first = np.exp(-sa[:, None] * ln[None, :]).sum(axis=1)
    second = np.exp((sa[:, None] - 1) * ln[None, :]).sum(axis=1)
    return first + np.exp(_log_chi(sa)) * second


def afe_error_estimate(sigma, t):
    return (t / TWO_PI) ** (-np.asarray(sigma) / 2)


# ---- argument unwinding ---------------------------------------------------------

SIGMA_START = 2.0


def _unwind(t: float, sigma_end: float, cfg: ZetaEvalConfig, evaluator, guard=None) -> ArgPathResult:
    """Continuous arg of zeta along 2+it -> sigma_end+it.

    On Re s = 2 the principal branch is the continuous one (|zeta - 1| < 1
    there), so the vertical leg from 2 to 2+it needs no steps. The horizontal
    leg halves any step whose argument increment exceeds pi/4. ``guard(sigma, t)``
    optionally gives the evaluator's error; the path must keep |zeta| above
    four times it.
    """
    n0 = max(2, int(math.ceil((SIGMA_START - sigma_end) / cfg.arg_step_cap)) + 1)
    sig = list(np.linspace(SIGMA_START, sigma_end, n0))
    vals = list(evaluator(np.array(sig) + 1j * t))
    mods = [abs(v) for v in vals]
    i = 0
    arg = math.atan2(vals[0].imag, vals[0].real)
    steps = 0
    while i < len(sig) - 1:
        d = math.atan2((vals[i + 1] / vals[i]).imag, (vals[i + 1] / vals[i]).real)
        if abs(d) > math.pi / 4:
            if sig[i] - sig[i + 1] < 1e-9:
                raise BranchError("argument unwinding cannot resolve a rapid phase change",
                                  complex(sig[i], t))
            mid = 0.5 * (sig[i] + sig[i + 1])
            v = complex(evaluator(np.array([mid + 1j * t]))[0])
            sig.insert(i + 1, mid)
            vals.insert(i + 1, v)
            mods.insert(i + 1, abs(v))
            continue
        arg += d
        steps += 1
        i += 1
    mm = min(mods)
    if guard is not None:
        ratio = np.array(mods) / guard(np.array(sig), t)
        if ratio.min() < 4.0:
            j = int(np.argmin(ratio))
            raise BranchError("|zeta| on the path is within the evaluator's error", complex(sig[j], t))
    if mm < MIN_MODULUS:
        j = int(np.argmin(mods))
        raise BranchError(f"path passes within {mm:.3g} of a zero", complex(sig[j], t))
    return ArgPathResult(t=float(t), im_log_zeta=arg, path_steps=steps, min_modulus_on_path=mm)


def _em_evaluator(cfg: ZetaEvalConfig):
    return lambda s: zeta_euler_maclaurin(s, cfg, tol=1e-12)


def unwind_arg(t: float, sigma_end: float = 0.5, cfg: ZetaEvalConfig = DEFAULT_CONFIG) -> ArgPathResult:
    """Continuous Im log zeta(sigma_end + it) by Euler-Maclaurin unwinding (t <= 10^6)."""
    if t > EM_MAX_HEIGHT:
        raise DomainError("argument unwinding is limited to t <= 1e6")
    return _unwind(t, sigma_end, cfg, _em_evaluator(cfg))


# ---- zero counting ----------------------------------------------------------------

class _ZeroIndex:
    """Verified sign-change brackets of Z on [10, frontier].

    The frontier always sits at a good Gram point g_n whose zero count n+1 was
    matched by the sign-change scan.
    """

    CHUNK = 250.0
    STEP = 0.2

    def __init__(self, cfg: ZetaEvalConfig):
        self.cfg = cfg
        self.frontier = 10.0
        self.count = 0
        self.lo = np.zeros(0)
        self.hi = np.zeros(0)
        self.slo = np.zeros(0)   # sign of Z at bracket left end
        self._zeros: dict[int, float] = {}

    def _Z(self, t):
        return riemann_siegel_Z(t, self.cfg)

    def _brackets(self, grid: np.ndarray, z: np.ndarray):
        s = np.sign(z)
        change = s[:-1] * s[1:] < 0
        return grid[:-1][change], grid[1:][change], s[:-1][change]

    def _refined(self, a: float, b: float, step: float, gram: np.ndarray):
        n = max(2, int(math.ceil((b - a) / step)) + 1)
        grid = np.union1d(np.linspace(a, b, n), gram[(gram > a) & (gram < b)])
        return grid, self._Z(grid)

    def extend(self, target: float) -> None:
        if target > COUNT_MAX_HEIGHT + 50:
            raise DomainError("count_zeros is limited to t <= 1e6")
        while self.frontier < target:
            a = self.frontier
            b = a + min(max(self.CHUNK, target + 10.0 - a), 4 * self.CHUNK)
            ns, gs = gram_points(a, b)
            grid = np.union1d(np.arange(a, b, self.STEP), np.append(gs, b))
            z = self._Z(grid)
            zg = z[np.searchsorted(grid, gs)]
            good = (np.where(ns % 2 == 0, 1.0, -1.0) * zg) > 0
            lo, hi, sl = self._brackets(grid, z)
            prev = a
            prev_count = self.count
            acc_lo, acc_hi, acc_s = [], [], []
            accepted = None
            for n, g, ok in zip(ns, gs, good):
                if not ok or g <= a:
                    continue
                sel = (lo >= prev) & (hi <= g)
                c = prev_count + int(np.count_nonzero(sel))
                seg = (lo[sel], hi[sel], sl[sel])
                if c != n + 1:
                    for step in (self.STEP / 10, self.STEP / 100):
                        rg, rz = self._refined(prev, g, step, gs)
                        seg = self._brackets(rg, rz)
                        c = prev_count + seg[0].size
                        if c == n + 1:
                            break
                    if c != n + 1:
                        raise MiscountError(
                            f"sign changes give N({g:.6f}) = {c}, Gram prediction {n + 1}",
                            (float(prev), float(g)))
                acc_lo.append(seg[0]); acc_hi.append(seg[1]); acc_s.append(seg[2])
                prev, prev_count, accepted = g, c, g
            if accepted is None:
                # no good Gram point in the window; widen it
                self.CHUNK *= 2
                continue
            self.lo = np.concatenate([self.lo] + acc_lo)
            self.hi = np.concatenate([self.hi] + acc_hi)
            self.slo = np.concatenate([self.slo] + acc_s)
            self.frontier = float(accepted)
            self.count = prev_count

    def count_at(self, t: float) -> int:
        self.extend(t + 1e-9)
        k = int(np.searchsorted(self.hi, t, side="right"))
        # a bracket may straddle t; compare with the located zero so N agrees with zeros_in
        if k < self.lo.size and self.lo[k] < t < self.hi[k] and t > self.zero(k):
            k += 1
        return k

    def zero(self, i: int) -> float:
        if i not in self._zeros:
            lo, hi = float(self.lo[i]), float(self.hi[i])
            # the bracket comes from the configured Z; the accurate Z may cross just outside it
            pad = 0.0
            while precise_Z(lo - pad) * precise_Z(hi + pad) > 0 and pad < 0.05:
                pad = 2 * pad if pad else 1e-4
            self._zeros[i] = brentq(precise_Z, lo - pad, hi + pad, xtol=1e-13, rtol=1e-15)
        return self._zeros[i]

    def zeros_between(self, a: float, b: float) -> np.ndarray:
        self.extend(b + 1e-9)
        i0 = int(np.searchsorted(self.hi, a, side="left"))
        i1 = int(np.searchsorted(self.lo, b, side="right"))
        zs = [self.zero(i) for i in range(i0, i1)]
        return np.array([z for z in zs if a <= z <= b])


PRECISE_CONFIG = ZetaEvalConfig(rs_correction_terms=4)
PRECISE_EM_HEIGHT = 1000.0


def precise_Z(t: float) -> float:
    """Z(t) to about 1e-9: Euler-Maclaurin below PRECISE_EM_HEIGHT, all four RS corrections above."""
    if t < PRECISE_EM_HEIGHT:
        return float((zeta_euler_maclaurin(0.5 + 1j * t, PRECISE_CONFIG, 1e-12)
                      * np.exp(1j * theta_rs(t))).real)
    return float(riemann_siegel_Z(np.array([t]), PRECISE_CONFIG)[0])


_INDEXES: dict[ZetaEvalConfig, _ZeroIndex] = {}


def _index(cfg: ZetaEvalConfig) -> _ZeroIndex:
    if cfg not in _INDEXES:
        _INDEXES[cfg] = _ZeroIndex(cfg)
    return _INDEXES[cfg]


def count_zeros(t: float, cfg: ZetaEvalConfig = DEFAULT_CONFIG) -> int:
    """N(t): zeros with ordinate in (0, t], by sign changes of Z checked at Gram points."""
    if not 10.0 <= t <= COUNT_MAX_HEIGHT:
        raise DomainError("count_zeros requires 10 <= t <= 1e6")
    n = _index(cfg).count_at(float(t))
    s = n - theta_rs(t) / math.pi - 1
    if abs(s) >= 3:
        raise MiscountError(f"|N(t) - theta/pi - 1| = {abs(s):.3f} outside the sanity band", (t, t))
    return n


def zeros_in(a: float, b: float, cfg: ZetaEvalConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Located zero ordinates in [a, b] (10 <= a < b <= 1e6)."""
    return _index(cfg).zeros_between(a, b)


def _check_not_zero(t: float, cfg: ZetaEvalConfig) -> None:
    if t >= 10.0:
        near = zeros_in(max(10.0, t - 2 * ZERO_EXCLUSION), t + 2 * ZERO_EXCLUSION, cfg)
        if near.size and np.min(np.abs(near - t)) < ZERO_EXCLUSION:
            z = near[np.argmin(np.abs(near - t))]
            raise BranchError(f"t = {t} lies within {ZERO_EXCLUSION:g} of a zero ordinate", complex(0.5, z))


def im_log_zeta_half(t: float, method: str = "zerocount",
                     cfg: ZetaEvalConfig = DEFAULT_CONFIG) -> ArgPathResult:
    """Continuous branch of Im log zeta(1/2 + it), real on (1, inf).

    ``zerocount`` uses the exact identity pi(N(t) - 1) - theta(t);
    ``unwind`` follows the path 2 -> 2+it -> 1/2+it.
    """
    if t < 2.0:
        raise DomainError("im_log_zeta_half requires t >= 2")
    if method == "unwind":
        return unwind_arg(t, 0.5, cfg)
    if method != "zerocount":
        raise DomainError(f"unknown method {method!r}")
    _check_not_zero(t, cfg)
    n = count_zeros(t, cfg) if t >= 10.0 else 0
    val = math.pi * (n - 1) - theta_rs(t)
    return ArgPathResult(t=float(t), im_log_zeta=val, path_steps=0, min_modulus_on_path=float("nan"))


def delta_fluctuation(t: float, cfg: ZetaEvalConfig = DEFAULT_CONFIG) -> float:
    """Delta(t) = N(t) - t log t / 2pi + t (1 + log 2pi) / 2pi."""
    n = count_zeros(t, cfg)
    return n - t * math.log(t) / TWO_PI + t * (1 + math.log(TWO_PI)) / TWO_PI


def argzeta_drift_check(t1: float, t2: float, cfg: ZetaEvalConfig = DEFAULT_CONFIG) -> float:
    """Im log zeta(1/2+it2) - Im log zeta(1/2+it1) + (t2 - t1) log t2."""
    if not 2.0 <= t1 <= t2:
        raise DomainError("argzeta_drift_check requires 2 <= t1 <= t2")
    if t1 == t2:
        return 0.0
    a = im_log_zeta_half(t1, "zerocount", cfg).im_log_zeta
    b = im_log_zeta_half(t2, "zerocount", cfg).im_log_zeta
    return b - a + (t2 - t1) * math.log(t2)


# ---- local counting at arbitrary height ---------------------------------------------

def anchored_count(t: float, cfg: ZetaEvalConfig = DEFAULT_CONFIG) -> int:
    """N(t) at any height >= 10 from one unwound argument value.

    N(t) = (Im log zeta + theta)/pi + 1 is an integer, so an argument estimate
    accurate to well under pi/2 fixes it; the parity is then checked against
    the sign of Z(t), which equals (-1)^(N(t)-1).
    """
    if t < 10.0:
        raise DomainError("anchored_count requires t >= 10")
    if t <= EM_ANCHOR_HEIGHT:
        arg = _unwind(t, 0.5, cfg, _em_evaluator(cfg)).im_log_zeta
    else:
        arg = _unwind(t, 0.5, cfg, zeta_afe, guard=afe_error_estimate).im_log_zeta
    x = (arg + theta_rs(t)) / math.pi + 1
    n = int(round(x))
    z = riemann_siegel_Z(t, cfg)
    if abs(x - n) > 0.25 or (z > 0) != (n % 2 == 1):
        raise NumericalError(f"zero-count anchor at t = {t} is ambiguous (estimate {x:.3f})")
    return n


def _robust_anchor(t: float, cfg: ZetaEvalConfig, toward: float) -> tuple[float, int]:
    """Anchor at t or, failing that, at a nearby point shifted toward ``toward``."""
    sgn = 1.0 if toward >= t else -1.0
    last = None
    for j in range(8):
        ta = t + sgn * 0.13 * j
        try:
            return ta, anchored_count(ta, cfg)
        except (NumericalError, BranchError) as exc:
            last = exc
    raise last


@dataclass(frozen=True)
class WindowArg:
    """Im log zeta(1/2+it) on a window [a, b], described by its zeros."""
    a: float
    b: float
    n_a: int
    zeros: np.ndarray
    sup_im: float
    inf_im: float


def window_arg(a: float, b: float, cfg: ZetaEvalConfig = DEFAULT_CONFIG,
               step: float | None = None) -> WindowArg:
    """Zeros in [a, b] and the extrema of Im log zeta there.

    Both endpoints are anchored independently; the sign-change count in
    between must bridge the two anchors, otherwise the grid is refined.
    Im log zeta decreases between zeros and jumps by pi at each, so the
    supremum is attained at a or just after a zero and the infimum just
    before a zero or at b.
    """
    if a < 10.0 or b <= a:
        raise DomainError("window_arg requires 10 <= a < b")
    if step is None:
        step = min(0.05, math.pi / (4 * math.log(max(b, 20.0) / TWO_PI)))
    a0, na = _robust_anchor(a, cfg, b)
    b0, nb = _robust_anchor(b, cfg, a)
    lo, hi = min(a, a0), max(b, b0)
    for refine in (1, 10, 100):
        h = step / refine
        grid = np.linspace(lo, hi, max(2, int(math.ceil((hi - lo) / h)) + 1))
        for extra in (a0, b0, a, b):
            grid = np.union1d(grid, [extra])
        z = riemann_siegel_Z(grid, cfg)
        s = np.sign(z)
        ch = np.flatnonzero(s[:-1] * s[1:] < 0)
        ia, ib = np.searchsorted(grid, a0), np.searchsorted(grid, b0)
        between = ch[(ch >= ia) & (ch < ib)]
        if na + between.size == nb:
            break
    else:
        raise MiscountError(f"sign changes on [{a0}, {b0}] do not bridge anchors {na} -> {nb}", (a0, b0))
    f = lambda x: float(riemann_siegel_Z(x, cfg))
    zeros = np.array([brentq(f, grid[i], grid[i + 1], xtol=1e-12) for i in ch])
    n_a = na + int(np.count_nonzero(zeros <= a)) - int(np.count_nonzero(zeros <= a0))
    inside = zeros[(zeros > a) & (zeros <= b)]
    th_a, th_b = theta_rs(a), theta_rs(b)
    cand_sup = [math.pi * (n_a - 1) - th_a]
    cand_inf = [math.pi * (n_a + inside.size - 1) - th_b]
    if inside.size:
        thz = theta_rs(inside)
        j = np.arange(1, inside.size + 1)
        cand_sup.extend(math.pi * (n_a + j - 1) - thz)
        cand_inf.extend(math.pi * (n_a + j - 2) - thz)
    return WindowArg(a=a, b=b, n_a=n_a, zeros=inside,
                     sup_im=float(max(cand_sup)), inf_im=float(min(cand_inf)))


def log_abs_zeta_half(t, cfg: ZetaEvalConfig = DEFAULT_CONFIG):
    """log|zeta(1/2+it)| = log|Z(t)| (t >= 10)."""
    return np.log(np.abs(riemann_siegel_Z(t, cfg)))
