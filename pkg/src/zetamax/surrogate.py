"""Coarse-grained prime-sum fields and their random models.

For shifts k = 0..H-1 and bands m = 0..K-1 the prime sum over
(x_m, x_{m+1}], x_m = exp(H^{m/K}), is evaluated at the height
UT - h/2 + kh/H (field S), clamped (S0), with the phases p^{-iUT} replaced by
independent uniform phases (V), or replaced by a Gaussian vector with the
matching covariance (G).
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.special import sici

from .errors import DomainError, NumericalError
from .io import fmt_real, read_csv, write_csv
from .primes import PrimeTable, dirichlet_terms
from .rng import stream

KINDS = ("S", "S0", "V", "G")
KAPPAS = {"1": 1 + 0j, "i": 1j, "-i": -1j}
PHASE_KEY = 1          # stream key for the uniform phases X_p
COLUMN_KEY = 2         # G column m uses key COLUMN_KEY + m
BLOCK = 64             # G draws are made in aligned blocks of trial ids
MAX_GAUSS_H = 10_000


def parse_kappa(k) -> complex:
    if isinstance(k, str):
        key = k.strip().replace(" ", "")
        if key not in KAPPAS:
            raise DomainError(f"kappa must be one of 1, i, -i; got {k!r}")
        return KAPPAS[key]
    k = complex(k)
    if k not in KAPPAS.values():
        raise DomainError(f"kappa must be one of 1, i, -i; got {k}")
    return k


def kappa_name(k: complex) -> str:
    return {v: n for n, v in KAPPAS.items()}[complex(k)]


@dataclass(frozen=True)
class SurrogateConfig:
    T: float
    h: float
    delta: float
    K: int
    kappa: complex
    H: int
    log_edges: tuple               # L_m = H^{m/K} = log x_m, m = 0..K
    regime_notes: tuple = ()
    H_override: bool = False

    @property
    def band_edges(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(np.array(self.log_edges))

    @property
    def clamp(self) -> float:
        return math.log(self.T) ** (self.delta / 3)

    def shifts(self) -> np.ndarray:
        return np.arange(self.H) * self.h / self.H

    def as_dict(self) -> dict:
        return {"T": self.T, "h": self.h, "delta": self.delta, "K": self.K,
                "kappa": kappa_name(self.kappa), "H": self.H}


def regime_violations(T: float, H: float) -> list[str]:
    out = []
    lo = math.log(3 + T) ** 0.1
    hi = math.log(T) / math.log(math.log(T)) ** 2
    if H < lo:
        out.append(f"H = {H} < (log(3+T))^(1/10) = {lo:.4g}")
    if H > hi:
        out.append(f"H = {H} > log T/(log log T)^2 = {hi:.4g}")
    return out


def derive_config(T: float, h: float, delta: float, K: int, kappa=1, H: int | None = None,
                  strict: bool = False) -> SurrogateConfig:
    """Validate (T, h, delta, K, kappa) and derive H = floor((log T)^(1-delta)) and the bands.

    The admissible range for H is only reachable at astronomically large T,
    so by default a violation is recorded in ``regime_notes`` and warned
    about; ``strict`` turns it into a DomainError. ``H`` overrides the derived
    value for Gaussian-only experiments.
    """
    if not T > 10:
        raise DomainError(f"T must exceed 10 (got {T})")
    if not h > 0:
        raise DomainError(f"h must be positive (got {h})")
    if not 0 < delta < 0.5:
        raise DomainError(f"delta = {delta} outside (0, 1/2)")
    if int(K) != K or K < 2:
        raise DomainError(f"K must be an integer >= 2 (got {K})")
    K = int(K)
    kappa = parse_kappa(kappa)
    derived = int(math.floor(math.log(T) ** (1 - delta)))
    if H is None:
        H = derived
    elif int(H) != H:
        raise DomainError(f"H must be an integer (got {H})")
    H = int(H)
    if H < 2:
        raise DomainError(f"H = {H} < 2; increase T")
    notes = regime_violations(T, H)
    if notes:
        if strict:
            raise DomainError("regime violated: " + "; ".join(notes))
        warnings.warn("surrogate regime not met: " + "; ".join(notes), stacklevel=2)
    edges = tuple(float(H) ** (m / K) for m in range(K + 1))
    edges = edges[:-1] + (float(H),)
    return SurrogateConfig(T=float(T), h=float(h), delta=float(delta), K=K, kappa=kappa, H=H,
                           log_edges=edges, regime_notes=tuple(notes), H_override=H != derived)


# ---- field container ---------------------------------------------------------------

@dataclass(frozen=True)
class FieldMatrix:
    kind: str
    values: np.ndarray            # shape (H, K), entry (k, m)
    seed: tuple | None = None     # (master seed, trial) for V and G
    u: float | None = None        # the uniform variable for S and S0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown field kind {self.kind!r}")
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DomainError("field values must be an H x K array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def H(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]

    def to_csv(self, path: Path | str) -> None:
        rows = ((k, m, self.values[k, m]) for k in range(self.H) for m in range(self.K))
        write_csv(path, ["k", "m", "value"], rows)

    @classmethod
    def from_csv(cls, path: Path | str, kind: str) -> "FieldMatrix":
        _, rows = read_csv(path)
        k = np.array([int(r[0]) for r in rows])
        m = np.array([int(r[1]) for r in rows])
        vals = np.zeros((k.max() + 1, m.max() + 1))
        vals[k, m] = [float(r[2]) for r in rows]
        return cls(kind, vals)

    def to_bytes(self) -> bytes:
        head = struct.pack("<HIH", KINDS.index(self.kind), self.H, self.K)
        return head + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "FieldMatrix":
        kind, H, K = struct.unpack("<HIH", raw[:8])
        vals = np.frombuffer(raw[8:], dtype="<f8").reshape(H, K).copy()
        return cls(KINDS[kind], vals)

    def write_binary(self, path: Path | str) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read_binary(cls, path: Path | str) -> "FieldMatrix":
        return cls.from_bytes(Path(path).read_bytes())

    def __repr__(self) -> str:
        return (f"FieldMatrix(kind={self.kind}, H={self.H}, K={self.K}, "
                f"max={fmt_real(self.values.max())})")


# ---- S, S0, V ------------------------------------------------------------------------

@dataclass(frozen=True)
class _Bands:
    primes: list                  # primes of band m
    logs: list
    shift_phase: list             # p^{-i k h/H}, shape (n_m, H)


_BANDS: dict = {}


def _bands(cfg: SurrogateConfig, table: PrimeTable) -> _Bands:
    table.require(math.exp(cfg.H), "e^H")
    key = (table.limit, len(table), cfg.H, cfg.K, cfg.h)
    if key not in _BANDS:
        p, lp = table.upto(math.exp(cfg.H) * (1 + 1e-15))
        L = np.array(cfg.log_edges)
        keep = (lp > L[0]) & (lp <= L[-1])
        p, lp = p[keep], lp[keep]
        idx = np.searchsorted(L, lp, side="left") - 1      # L_m < log p <= L_{m+1}
        ps = [p[idx == m] for m in range(cfg.K)]
        ls = [lp[idx == m] for m in range(cfg.K)]
        sh = [np.exp(-1j * np.outer(l, cfg.shifts())) for l in ls]
        if len(_BANDS) > 8:
            _BANDS.clear()
        _BANDS[key] = _Bands(ps, ls, sh)
    return _BANDS[key]


def band_primes(cfg: SurrogateConfig, table: PrimeTable, m: int) -> np.ndarray:
    return _bands(cfg, table).primes[m]


def s_field(cfg: SurrogateConfig, u: float, table: PrimeTable) -> FieldMatrix:
    """Band sums at the height uT - h/2 + kh/H."""
    if not 0 <= u <= 1:
        raise DomainError("u must lie in [0, 1]")
    tau = u * cfg.T - cfg.h / 2
    b = _bands(cfg, table)
    out = np.zeros((cfg.H, cfg.K))
    for m in range(cfg.K):
        if b.primes[m].size:
            c = dirichlet_terms(b.primes[m], 0.5, tau)
            out[:, m] = (cfg.kappa * (c @ b.shift_phase[m])).real
    return FieldMatrix("S", out, u=float(u))


def small_prime_term(cfg: SurrogateConfig, u: float) -> np.ndarray:
    """Contribution of p = 2, which lies below x_0 = e, for each shift k."""
    tau = u * cfg.T - cfg.h / 2
    c = dirichlet_terms(np.array([2]), 0.5, tau)[0]
    return (cfg.kappa * c * np.exp(-1j * math.log(2.0) * cfg.shifts())).real


def truncate(f: FieldMatrix, cfg: SurrogateConfig) -> FieldMatrix:
    """Clamp each entry to [-(log T)^(delta/3), (log T)^(delta/3)]."""
    if f.kind not in ("S", "S0"):
        raise DomainError("truncate applies to S fields")
    c = cfg.clamp
    return FieldMatrix("S0", np.clip(f.values, -c, c), seed=f.seed, u=f.u)


def v_block(cfg: SurrogateConfig, table: PrimeTable, seed: int, block: int) -> np.ndarray:
    """V fields for the aligned trial block, shape (BLOCK, H, K).

    Trial t draws one uniform phase per prime <= e^H from its own stream,
    so its field does not depend on which other trials are computed.
    """
    b = _bands(cfg, table)
    sizes = [x.size for x in b.primes]
    n = sum(sizes)
    trials = range(block * BLOCK, (block + 1) * BLOCK)
    u = np.stack([stream(seed, t, PHASE_KEY).random(n) for t in trials])
    x = np.exp(2j * math.pi * u)
    out = np.zeros((BLOCK, cfg.H, cfg.K))
    s = 0
    for m, size in enumerate(sizes):
        if size:
            lp = b.logs[m]
            c = np.exp(-0.5 * lp + 0.5j * cfg.h * lp)[:, None] * b.shift_phase[m]
            out[:, :, m] = (cfg.kappa * (x[:, s:s + size] @ c)).real
        s += size
    return out


def v_fields(cfg: SurrogateConfig, table: PrimeTable, seed: int, trials) -> dict[int, FieldMatrix]:
    trials = sorted(set(int(t) for t in trials))
    out = {}
    for blk in sorted({t // BLOCK for t in trials}):
        vals = v_block(cfg, table, seed, blk)
        for t in trials:
            if t // BLOCK == blk:
                out[t] = FieldMatrix("V", vals[t - blk * BLOCK], seed=(int(seed), t))
    return out


def v_field(cfg: SurrogateConfig, table: PrimeTable, seed: int, trial: int = 0) -> FieldMatrix:
    """Band sums with independent uniform unit phases X_p, one per prime <= e^H."""
    return v_fields(cfg, table, seed, [trial])[int(trial)]


def band_variance(cfg: SurrogateConfig, table: PrimeTable) -> np.ndarray:
    """Exact Var V(k, m) = sum over the band of 1/(2p)."""
    return np.array([math.fsum(0.5 / p.astype(np.float64)) for p in _bands(cfg, table).primes])


# ---- covariance ------------------------------------------------------------------------

def cov_I_log(lx, ly, theta):
    """Integral of cos(theta u)/u over [lx, ly] (lx = log x, ly = log y)."""
    lx = np.asarray(lx, dtype=np.float64)
    ly = np.asarray(ly, dtype=np.float64)
    th = np.abs(np.asarray(theta, dtype=np.float64))
    base = np.log(ly) - np.log(lx)
    safe = np.where(th > 0, th, 1.0)
    _, ci_y = sici(safe * ly)
    _, ci_x = sici(safe * lx)
    # for small theta*ly the Ci difference cancels; sum its power series instead
    small = th * ly <= 1.0
    series = base.copy() if isinstance(base, np.ndarray) else np.array(base)
    term_x, term_y = np.ones_like(series), np.ones_like(series)
    for k in range(1, 13):
        term_x = term_x * (th * lx) ** 2
        term_y = term_y * (th * ly) ** 2
        series = series + (-1) ** k * (term_y - term_x) / (2 * k * math.factorial(2 * k))
    out = np.where(th > 0, np.where(small, series, ci_y - ci_x), base)
    out = np.where(ly == lx, 0.0, out)
    return out if out.ndim else float(out)


def cov_I(x: float, y: float, theta: float) -> float:
    """Integral of cos(theta log t)/(t log t) over [x, y], for 2 <= x <= y."""
    if x < 2:
        raise DomainError(f"cov_I requires x >= 2 (got {x})")
    if y < x:
        raise DomainError("cov_I requires y >= x")
    return cov_I_log(math.log(x), math.log(y), theta)


def column_covariance(cfg: SurrogateConfig, m: int) -> np.ndarray:
    lags = np.arange(cfg.H) * cfg.h / cfg.H
    row = 0.5 * cov_I_log(cfg.log_edges[m], cfg.log_edges[m + 1], lags)
    return linalg.toeplitz(row)


@dataclass(frozen=True)
class ColumnFactor:
    lower: np.ndarray = field(repr=False)
    jitter: float = 0.0


JITTERS = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8)
DENSE_H = 2048      # factors up to this size are cached; larger ones are rebuilt per call


def _factor(H: int, K: int, h: float, m: int) -> ColumnFactor:
    if H > MAX_GAUSS_H:
        raise DomainError(f"H = {H} exceeds the dense-covariance limit {MAX_GAUSS_H}")
    lags = np.arange(H) * h / H
    row = 0.5 * cov_I_log(float(H) ** (m / K), float(H) ** ((m + 1) / K) if m + 1 < K else float(H), lags)
    for j in JITTERS:
        c = linalg.toeplitz(row)
        c[np.diag_indices_from(c)] += j * row[0]
        try:
            low = linalg.cholesky(c, lower=True, overwrite_a=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        low.setflags(write=False)
        return ColumnFactor(low, j)
    lam = linalg.eigh(linalg.toeplitz(row), eigvals_only=True, subset_by_index=[0, 0])[0]
    raise NumericalError(f"covariance of column {m} not factorizable at jitter 1e-8; "
                         f"smallest eigenvalue {lam:.3g}")


_cached_factor = lru_cache(maxsize=16)(_factor)


def column_factor(H: int, K: int, h: float, m: int) -> ColumnFactor:
    """Lower Cholesky factor of one column's covariance, escalating diagonal jitter."""
    return _cached_factor(H, K, h, m) if H <= DENSE_H else _factor(H, K, h, m)


def _fill_column(out: np.ndarray, f: ColumnFactor, seed: int, block: int, m: int) -> None:
    trials = range(block * BLOCK, (block + 1) * BLOCK)
    z = np.stack([stream(seed, t, COLUMN_KEY + m).standard_normal(f.lower.shape[0]) for t in trials], axis=1)
    out[:, :, m] = (f.lower @ z).T


def g_block(cfg: SurrogateConfig, seed: int, block: int) -> np.ndarray:
    """G fields for trial ids block*BLOCK ... block*BLOCK + BLOCK - 1, shape (BLOCK, H, K)."""
    out = np.empty((BLOCK, cfg.H, cfg.K))
    for m in range(cfg.K):
        _fill_column(out, column_factor(cfg.H, cfg.K, cfg.h, m), seed, block, m)
    return out


def g_fields(cfg: SurrogateConfig, seed: int, trials) -> dict[int, FieldMatrix]:
    """G fields for the requested trial ids, always drawn in whole aligned blocks.

    Columns are the outer loop so that an uncached large factor is built once per call.
    """
    trials = sorted(set(int(t) for t in trials))
    blocks = sorted({t // BLOCK for t in trials})
    vals = {b: np.empty((BLOCK, cfg.H, cfg.K)) for b in blocks}
    for m in range(cfg.K):
        f = column_factor(cfg.H, cfg.K, cfg.h, m)
        for b in blocks:
            _fill_column(vals[b], f, seed, b, m)
        del f
    return {t: FieldMatrix("G", vals[t // BLOCK][t % BLOCK], seed=(int(seed), t)) for t in trials}


def g_field(cfg: SurrogateConfig, seed: int, trial: int = 0) -> FieldMatrix:
    """Centered Gaussian field with column covariance C_m[k, l] = I(x_m, x_m+1, (k-l)h/H)/2."""
    return g_fields(cfg, seed, [trial])[int(trial)]


def gaussian_laplace_closed_form(cfg: SurrogateConfig, k: int, l: int, lam, mu) -> complex:
    """E exp(sum_{m>=1} lam_m G(k,m) + mu_m G(l,m)) in closed form."""
    lam = np.asarray(lam, dtype=np.complex128)
    mu = np.asarray(mu, dtype=np.complex128)
    if lam.shape != (cfg.K - 1,) or mu.shape != (cfg.K - 1,):
        raise DomainError(f"lambda and mu need K-1 = {cfg.K - 1} entries (bands m = 1..K-1)")
    theta = (k - l) * cfg.h / cfg.H
    total = 0j
    for i, m in enumerate(range(1, cfg.K)):
        lx, ly = cfg.log_edges[m], cfg.log_edges[m + 1]
        total += cov_I_log(lx, ly, 0.0) * (lam[i] ** 2 + mu[i] ** 2) / 4
        total += cov_I_log(lx, ly, theta) * lam[i] * mu[i] / 2
    return complex(np.exp(total))
