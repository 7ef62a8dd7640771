"""Prime tables and the classical prime sums built on them."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, ResourceError

SEGMENT_SIZE = 1 << 20
DEFAULT_BUDGET = 1 << 31
CACHE_ENV = "ZETAMAX_CACHE"


@dataclass(frozen=True)
class PrimeTable:
    """Primes up to ``limit`` with their natural logarithms.

    Arrays are made read-only so a table can be shared between workers.
    """
    limit: int
    primes: np.ndarray
    logs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.primes.setflags(write=False)
        self.logs.setflags(write=False)

    def __len__(self) -> int:
        return int(self.primes.size)

    def count_upto(self, x: float) -> int:
        """Number of tabulated primes p <= x."""
        return int(np.searchsorted(self.primes, math.floor(x), side="right")) if x >= 2 else 0

    def upto(self, x: float) -> tuple[np.ndarray, np.ndarray]:
        n = self.count_upto(x)
        return self.primes[:n], self.logs[:n]

    def require(self, x: float, what: str = "x") -> None:
        if x > self.limit:
            raise DomainError(f"{what} = {x:.6g} exceeds table limit {self.limit}; "
                              f"sieve at least to {math.ceil(x)}")


def _from_primes(limit: int, primes: np.ndarray) -> PrimeTable:
    primes = np.ascontiguousarray(primes, dtype=np.int64)
    return PrimeTable(int(limit), primes, np.log(primes.astype(np.float64)))


def _small_sieve(n: int) -> np.ndarray:
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    flags = np.ones(n + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if flags[p]:
            flags[p * p::p] = False
    return np.flatnonzero(flags).astype(np.int64)


def sieve(limit: int, budget: int = DEFAULT_BUDGET, segment: int = SEGMENT_SIZE) -> PrimeTable:
    """Segmented sieve of Eratosthenes returning every prime <= limit."""
    limit = int(limit)
    if limit < 1:
        raise DomainError(f"limit must be >= 1, got {limit}")
    if limit > budget:
        raise ResourceError(f"limit {limit} exceeds the sieve memory budget {budget}")
    root = math.isqrt(limit)
    base = _small_sieve(root)
    chunks = [base]
    lo = root + 1
    while lo <= limit:
        hi = min(lo + segment, limit + 1)
        flags = np.ones(hi - lo, dtype=bool)
        for p in base:
            p = int(p)
            start = max(p * p, -(-lo // p) * p)
            if start >= hi:
                continue
            flags[start - lo::p] = False
        chunks.append(np.flatnonzero(flags).astype(np.int64) + lo)
        lo = hi
    return _from_primes(limit, np.concatenate(chunks))


# ---- sums -----------------------------------------------------------------

def _check_x(table: PrimeTable, x: float) -> None:
    if x > table.limit:
        raise DomainError(f"x = {x} exceeds table limit {table.limit}")


def mertens_sum(table: PrimeTable, x: float) -> float:
    """Sum of 1/p over p <= x."""
    _check_x(table, x)
    p, _ = table.upto(x)
    return math.fsum(1.0 / p.astype(np.float64))


def sigma_theta(table: PrimeTable, x: float, theta: float) -> float:
    """Sum of cos(theta log p)/p over p <= x."""
    _check_x(table, x)
    p, lp = table.upto(x)
    return math.fsum(np.cos(theta * lp) / p)


def chebyshev_theta(table: PrimeTable, t: float) -> float:
    """Chebyshev's function: sum of log p over p <= t."""
    _check_x(table, t)
    _, lp = table.upto(t)
    return math.fsum(lp)


_TWO_PI_LD = np.longdouble(2) * np.arccos(np.longdouble(-1))


def log_phase(primes: np.ndarray, tau: float, k: int = 1) -> np.ndarray:
    """(tau * k * log p) mod 2pi, reduced in extended precision.

    At heights near 10^8 the float64 product tau * log p already carries an
    error of order 10^-7 rad; the long-double product and reduction keep the
    phase accurate to about 10^-11 where the platform provides 80-bit floats.
    """
    lp = np.log(np.asarray(primes).astype(np.longdouble))
    return np.fmod(np.longdouble(tau) * k * lp, _TWO_PI_LD).astype(np.float64)


def dirichlet_terms(primes: np.ndarray, sigma: float, tau: float, k: int = 1) -> np.ndarray:
    """p^{-k(sigma + i tau)} for each prime p."""
    p = np.asarray(primes)
    return np.exp(-k * sigma * np.log(p.astype(np.float64))) * np.exp(-1j * log_phase(p, tau, k))


# ---- on-disk cache ----------------------------------------------------------
# little-endian u64 limit, then u32 gaps (first gap measured from 0)

def save_cache(table: PrimeTable, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    gaps = np.diff(table.primes, prepend=0)
    if gaps.size and gaps.max() >= 2**32:
        raise ResourceError("prime gap does not fit in 32 bits")
    with open(path, "wb") as fh:
        fh.write(np.array([table.limit], dtype="<u8").tobytes())
        fh.write(gaps.astype("<u4").tobytes())


def load_cache(path: Path | str) -> PrimeTable:
    raw = Path(path).read_bytes()
    limit = int(np.frombuffer(raw[:8], dtype="<u8")[0])
    gaps = np.frombuffer(raw[8:], dtype="<u4").astype(np.int64)
    return _from_primes(limit, np.cumsum(gaps))


def cache_dir() -> Path | None:
    d = os.environ.get(CACHE_ENV)
    return Path(d) if d else None


def cached_sieve(limit: int, directory: Path | str | None = None,
                 budget: int = DEFAULT_BUDGET) -> PrimeTable:
    """Sieve through a cache keyed by limit; without a directory just sieve."""
    directory = Path(directory) if directory is not None else cache_dir()
    if directory is None:
        return sieve(limit, budget)
    path = directory / f"primes_{int(limit)}.bin"
    if path.exists():
        table = load_cache(path)
        if table.limit == int(limit):
            return table
    table = sieve(limit, budget)
    save_cache(table, path)
    return table
