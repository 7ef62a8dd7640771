"""Band-limited reconstruction and sampled supremum bounds.

A function whose frequencies lie in [-lam, lam] is determined by its values
at the nodes k*pi/(2 lam); the reconstruction kernel phi has a Fourier
transform equal to 1 on a neighbourhood of [-pi/2, pi/2] and vanishing
outside (-pi, pi).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BuildError, CoverageError, DomainError
from .io import write_csv
from .zeta import DEFAULT_CONFIG, ZetaEvalConfig, riemann_siegel_Z, rs_error_budget

DECAY_ORDERS = tuple(range(2, 11))
SAFETY = 1.1


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = np.asarray(x, dtype=np.float64)
    f = lambda u: np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
    a, b = f(x), f(1.0 - x)
    return a / (a + b)


@dataclass(frozen=True)
class InterpKernel:
    """Tabulated reconstruction kernel phi on [0, radius] (phi is even)."""
    step: float
    radius: float
    values: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    decay_constants: dict
    hat_plateau: tuple[float, float]
    hat_support: tuple[float, float]
    self_check: float

    def __call__(self, y):
        """phi(y) by piecewise-cubic lookup; zero beyond the tabulated radius."""
        y = np.abs(np.asarray(y, dtype=np.float64))
        inside = y < self.radius
        yi = np.where(inside, y, 0.0)
        j = np.minimum((yi / self.step).astype(np.int64), self.coeffs.shape[1] - 1)
        d = yi - j * self.step
        c = self.coeffs
        v = ((c[0, j] * d + c[1, j]) * d + c[2, j]) * d + c[3, j]
        return np.where(inside, v, 0.0)

    def hat(self, w):
        a, b = self.hat_plateau[1], self.hat_support[1]
        return smooth_step((b - np.abs(np.asarray(w, dtype=np.float64))) / (b - a))

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.values.size) * self.step

    def tail_radius(self, threshold: float) -> float:
        """Smallest y beyond which every tabulated |phi| is below threshold."""
        above = np.flatnonzero(np.abs(self.values) >= threshold)
        return float((above[-1] + 1) * self.step) if above.size else 0.0

    def decay_bound(self, y, A: int) -> np.ndarray:
        return self.decay_constants[A] / (1.0 + np.abs(y) ** A)

    def to_csv(self, path: Path | str, stride: int = 64) -> None:
        """Export (y, phi(y)) on the tabulation grid, symmetric about 0."""
        g = self.grid[::stride]
        v = self.values[::stride]
        y = np.concatenate([-g[:0:-1], g])
        f = np.concatenate([v[:0:-1], v])
        write_csv(path, ["y", "phi"], zip(y, f))


def _phi_fft(margin: float, step: float, period: float) -> np.ndarray:
    """phi on [0, period/2) from the trapezoid rule in frequency (exact up to aliasing)."""
    m = int(round(period / step))
    w = 2 * math.pi * np.arange(m // 2 + 1) / period
    a, b = math.pi / 2 + margin, math.pi - margin
    hat = smooth_step((b - w) / (b - a))
    return np.fft.irfft(hat, n=m)[: m // 2] / step


def build_interp_kernel(plateau_margin: float = 0.02, grid_step: float = 1.0 / 1024,
                        radius: float = 512.0, period: float = 4096.0,
                        tol: float = 1e-10) -> InterpKernel:
    """Tabulate phi with hat(phi) = 1 on |w| <= pi/2+m and 0 for |w| >= pi-m.

    The inverse Fourier integral is evaluated by the trapezoid rule on a
    frequency grid of spacing 2 pi/period; for a smooth compactly supported
    integrand the only error is aliasing from phi(y + j period), which the
    build measures by repeating the computation with half the period.
    """
    if not 0 < plateau_margin < math.pi / 4:
        raise DomainError("plateau_margin must lie in (0, pi/4) so plateau and transition fit in (-pi, pi)")
    if not radius <= period / 4:
        raise DomainError("radius must be at most period/4")
    full = _phi_fft(plateau_margin, grid_step, period)
    half = _phi_fft(plateau_margin, grid_step, period / 2)
    n = int(round(radius / grid_step)) + 1
    vals = full[:n].copy()
    err = float(np.max(np.abs(vals - half[:n])))
    if err > tol:
        raise BuildError(f"kernel quadrature self-check {err:.3g} exceeds {tol:g}")
    grid = np.arange(n) * grid_step
    spline = CubicSpline(grid, vals, bc_type=((1, 0.0), "not-a-knot"))
    decay = {A: SAFETY * float(np.max(np.abs(vals) * (1.0 + grid ** A))) for A in DECAY_ORDERS}
    return InterpKernel(step=grid_step, radius=float(grid[-1]), values=vals,
                        coeffs=np.ascontiguousarray(spline.c), decay_constants=decay,
                        hat_plateau=(-(math.pi / 2 + plateau_margin), math.pi / 2 + plateau_margin),
                        hat_support=(-(math.pi - plateau_margin), math.pi - plateau_margin),
                        self_check=err)


@lru_cache(maxsize=2)
def default_interp_kernel() -> InterpKernel:
    return build_interp_kernel()


# ---- reconstruction -------------------------------------------------------------

@dataclass(frozen=True)
class Reconstruction:
    value: np.ndarray | complex
    tail_bound: float


def _tail_bound(kernel: InterpKernel, dist: float) -> float:
    """Bound on sum over |j| >= dist of |phi(j)|, best over the decay orders."""
    if dist <= 0:
        return float("inf")
    best = float("inf")
    for A, K in kernel.decay_constants.items():
        best = min(best, 2 * K * (1.0 / (1.0 + dist ** A) + dist ** (1 - A) / (A - 1)))
    return best


def reconstruct(samples: Mapping[int, complex] | tuple[np.ndarray, np.ndarray], lam: float, x,
                kernel: InterpKernel | None = None, threshold: float = 1e-12) -> Reconstruction:
    """f(x) = sum_k phi(2 lam x/pi - k) f(k pi/(2 lam)), truncated to the given samples.

    Every node k with |2 lam x/pi - k| inside the kernel's ``threshold``
    radius must be present. The reported tail bound covers the omitted nodes.
    """
    kernel = kernel or default_interp_kernel()
    if lam <= 0:
        raise DomainError("lam must be positive")
    if isinstance(samples, Mapping):
        ks = np.array(sorted(samples), dtype=np.int64)
        fv = np.array([samples[int(k)] for k in ks], dtype=np.complex128)
    else:
        ks = np.asarray(samples[0], dtype=np.int64)
        fv = np.asarray(samples[1], dtype=np.complex128)
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    u = 2 * lam * xs / math.pi
    r = kernel.tail_radius(threshold)
    need_lo = int(math.floor(u.min() - r))
    need_hi = int(math.ceil(u.max() + r))
    have = set(ks.tolist())
    missing = [k for k in range(need_lo, need_hi + 1) if k not in have]
    if missing:
        raise CoverageError(f"{len(missing)} required sample nodes are missing", missing[:50])
    # omitted nodes lie beyond the contiguous block around each u
    kmin, kmax = int(ks.min()), int(ks.max())
    dist = float(min(np.min(u - kmin), np.min(kmax - u))) + 1.0
    out = np.empty(xs.size, dtype=np.complex128)
    blk = max(1, 2_000_000 // max(ks.size, 1))
    for i in range(0, xs.size, blk):
        w = kernel(u[i:i + blk, None] - ks[None, :])
        out[i:i + blk] = w @ fv
    tail = _tail_bound(kernel, dist) * float(np.max(np.abs(fv)) if fv.size else 0.0)
    value = out if np.ndim(x) else complex(out[0])
    return Reconstruction(value=value, tail_bound=tail)


# ---- suprema --------------------------------------------------------------------

GOLDEN = (math.sqrt(5) - 1) / 2


def dense_sup(f: Callable, a: float, b: float, n: int, refine_iter: int = 60) -> float:
    """Max of f over n uniform points, then a golden-section pass around the argmax."""
    if n < 2 or not a < b:
        raise DomainError("dense_sup requires n >= 2 and a < b")
    grid = np.linspace(a, b, n)
    try:
        vals = np.asarray(f(grid), dtype=np.float64)
        if vals.shape != grid.shape:
            raise ValueError
        g = lambda x: float(np.ravel(f(np.array([x])))[0])
    except (TypeError, ValueError):
        vals = np.array([float(f(x)) for x in grid])
        g = lambda x: float(f(x))
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = g(c), g(d)
    for _ in range(refine_iter):
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = g(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = g(d)
        if hi - lo < 1e-12 * max(1.0, abs(lo)):
            break
    return max(best, fc, fd)


# ---- certified bound on sup |zeta|^2 ---------------------------------------------------

@dataclass(frozen=True)
class SupBound:
    value: float
    advisory: bool
    terms: dict
    n_samples: int

    def __float__(self) -> float:
        return self.value


def sample_spacing(T: float) -> float:
    return math.pi / (2 * math.log(T / (2 * math.pi)))


def convexity_modulus_bound(t: float) -> float:
    """|Z(t)| <= 2 sum_{k <= sqrt(t/2pi)} k^-1/2 + 1 <= 4 (t/2pi)^(1/4) + 1."""
    return 4.0 * (t / (2 * math.pi)) ** 0.25 + 1.0


def certified_sup_bound_zeta_sq(t0: float, h: float, T: float, R: float | None = None,
                                kernel: InterpKernel | None = None,
                                zeta_cfg: ZetaEvalConfig = DEFAULT_CONFIG,
                                modulus_bound: float | None = None) -> SupBound:
    """Upper bound for sup |zeta(1/2+it)|^2 over [t0-h, t0+h] from O(h log T) samples.

    value = C [1 + h log T + sum_{|k| <= h lam} |zeta_k|^2
               + sum_{|k| <= R} |zeta_k|^2/(1+|k|^3) + M^2/(1+R^2) + E]
    with lam = log(T/2pi), nodes t0 + k pi/(2 lam), C = 27 K_3 from the kernel's
    measured decay constant, M a global bound on |zeta| over the sample range and
    E the Riemann-Siegel error budget of the samples. The result is flagged
    advisory if a sample exceeds M or the M-term dominates the sample sums.
    """
    if T <= 10:
        raise DomainError("certified_sup_bound_zeta_sq requires T > 10")
    if not (T >= t0 >= 50 * (1 + h ** 4)):
        raise DomainError("certified_sup_bound_zeta_sq requires T >= t0 >= 50(1+h^4)")
    kernel = kernel or default_interp_kernel()
    lam = math.log(T / (2 * math.pi))
    if R is None:
        R = t0 ** 0.25
    spacing = math.pi / (2 * lam)
    k_near = int(math.floor(h * lam))
    k_far = int(math.floor(R))
    kmax = max(k_near, k_far)
    k = np.arange(-kmax, kmax + 1)
    t = t0 + k * spacing
    z = riemann_siegel_Z(t, zeta_cfg)
    sq = z * z
    M = modulus_bound if modulus_bound is not None else convexity_modulus_bound(float(t.max()))
    eps = rs_error_budget(t, zeta_cfg.rs_correction_terms)
    near = np.abs(k) <= k_near
    far = np.abs(k) <= k_far
    terms = {
        "one": 1.0,
        "h_log_T": h * math.log(T),
        "near_sum": float(np.sum(sq[near])),
        "far_sum": float(np.sum(sq[far] / (1.0 + np.abs(k[far]) ** 3))),
        "sup_term": M * M / (1.0 + R * R),
        "rs_budget": float(np.sum((eps * (2 * np.abs(z) + eps))[far | near])),
    }
    C = 27.0 * kernel.decay_constants[3]
    value = C * sum(terms.values())
    advisory = bool(np.any(np.abs(z) > M) or terms["sup_term"] > terms["near_sum"] + terms["far_sum"])
    terms["constant"] = C
    terms["modulus_bound"] = M
    terms["spacing"] = spacing
    return SupBound(value=float(value), advisory=advisory, terms=terms, n_samples=int(k.size))
