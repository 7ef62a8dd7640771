"""Smoothing kernels and the prime-power sums they produce.

A compactly supported bump alpha gives psi = alpha * alpha (support [-2a, 2a],
psi(0) = 1 after L2 normalisation) and phi = alpha_hat^2 / 2pi, which is
nonnegative, integrates to 1 and has Fourier transform psi. Averaging
log zeta against phi turns the Dirichlet series of log zeta into the finite
sum Lambda_psi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import zeta as zmod
from .errors import BuildError, DomainError, NumericalError
from .io import write_csv
from .primes import PrimeTable, dirichlet_terms

FFT_SIZE = 1 << 20
STEPS_PER_UNIT = 128      # phi grid step is 1/(128 a)
RADIUS_UNITS = 200.0      # phi table radius is 200/a
DECAY_ORDERS = tuple(range(2, 11))
SAFETY = 1.1


def bump(x, a: float):
    """Unnormalised C-infinity bump exp(-1/(1-(x/a)^2)) on (-a, a)."""
    x = np.asarray(x, dtype=np.float64)
    u = (x / a) ** 2
    out = np.zeros_like(x)
    m = u < 1
    out[m] = np.exp(-1.0 / (1.0 - u[m]))
    return out


@dataclass(frozen=True)
class SmoothingKernel:
    """The pair (phi, psi) built from a bump on [-a, a]."""
    alpha_support: float
    support_A: float
    alpha_step: float
    alpha_norm: float                       # 1/||bump||_2
    psi_grid: np.ndarray = field(repr=False)
    psi_values: np.ndarray = field(repr=False)
    phi_step: float = 0.0
    phi_values: np.ndarray = field(repr=False, default=None)   # phi(j * phi_step), j >= 0
    decay_constants: dict = field(default_factory=dict)
    self_check: float = 0.0

    def __post_init__(self):
        for arr in (self.psi_grid, self.psi_values, self.phi_values):
            arr.setflags(write=False)
        object.__setattr__(self, "_psi_spline", CubicSpline(self.psi_grid, self.psi_values))
        t = np.arange(self.phi_values.size) * self.phi_step
        object.__setattr__(self, "_phi_spline", CubicSpline(t, self.phi_values))

    @property
    def phi_radius(self) -> float:
        return (self.phi_values.size - 1) * self.phi_step

    def psi(self, y):
        y = np.abs(np.asarray(y, dtype=np.float64))
        out = np.where(y < self.support_A, self._psi_spline(np.minimum(y, self.support_A)), 0.0)
        return out if out.ndim else float(out)

    def phi(self, t):
        """phi(t); zero beyond the table radius, where it is below the tail bound."""
        t = np.abs(np.asarray(t, dtype=np.float64))
        out = np.where(t <= self.phi_radius, self._phi_spline(np.minimum(t, self.phi_radius)), 0.0)
        return out if out.ndim else float(out)

    def alpha(self, x):
        return self.alpha_norm * bump(x, self.alpha_support)

    def alpha_hat(self, z):
        """Integral of alpha(x) e^{izx} dx for complex z, by the trapezoid rule.

        The grid is refined with |Re z| so the sum stays free of aliasing.
        """
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        a = self.alpha_support
        umax = float(np.max(np.abs(z.real))) if z.size else 0.0
        dx = min(self.alpha_step, 2 * math.pi / (2 * umax + 8192.0 / a))
        n = int(math.ceil(a / dx))
        x = np.linspace(-a, a, 2 * n + 1)
        w = self.alpha(x) * (x[1] - x[0])
        out = np.empty(z.shape, dtype=np.complex128)
        for i in range(0, z.size, 64):
            out[i:i + 64] = np.exp(1j * np.outer(z[i:i + 64], x)) @ w
        return out

    def tail_mass(self, radius: float) -> float:
        """Upper bound on the integral of |phi| over |t| > radius."""
        if radius <= 0:
            return float("inf")
        return min(2 * k * radius ** (1 - b) / (b - 1) for b, k in self.decay_constants.items())

    def truncation_radius(self, tol: float = 1e-10) -> float:
        r = 1.0
        while self.tail_mass(r) > tol and r < self.phi_radius:
            r *= 1.25
        return min(r, self.phi_radius)


def _alpha_samples(a: float, dx: float) -> np.ndarray:
    n = int(math.floor(a / dx))
    return bump(np.arange(-n, n + 1) * dx, a)


def _alpha_hat_fft(a: float, size: int, t_step: float, count: int) -> np.ndarray:
    """Unnormalised bump transform at t = j * t_step, j < count, via one real FFT."""
    dx = 2 * math.pi / (size * t_step)
    samples = _alpha_samples(a, dx)
    n = samples.size // 2
    buf = np.zeros(size)
    buf[:n + 1] = samples[n:]
    buf[size - n:] = samples[:n]
    return np.fft.rfft(buf).real[:count] * dx


def build_smoothing_kernel(a: float = 0.5, tol: float = 1e-12) -> SmoothingKernel:
    """Tabulate psi and phi for the bump of half-width ``a`` (a in [0.5, 10])."""
    if not 0.5 <= a <= 10:
        raise DomainError(f"bump half-width a = {a} outside [0.5, 10]")
    t_step = 1.0 / (STEPS_PER_UNIT * a)
    count = int(round(RADIUS_UNITS / a / t_step)) + 1
    dx = 2 * math.pi / (FFT_SIZE * t_step)

    samples = _alpha_samples(a, dx)
    l2 = math.sqrt(math.fsum(samples ** 2) * dx)
    norm = 1.0 / l2

    ahat = _alpha_hat_fft(a, FFT_SIZE, t_step, count) * norm
    coarse = _alpha_hat_fft(a, FFT_SIZE // 2, t_step, count) * norm
    err = float(np.max(np.abs(ahat - coarse)))
    if err > tol:
        raise BuildError(f"bump transform self-check failed: {err:.3g} > {tol:g}")
    phi = ahat ** 2 / (2 * math.pi)

    s = samples * norm
    psi = np.convolve(s, s) * dx
    n = s.size - 1
    y = np.arange(-n, n + 1) * dx
    keep = y >= 0
    y, psi = y[keep], psi[keep]
    # pad past the support so the spline sees the flat zero continuation
    pad = np.arange(1, 9) * dx + y[-1]
    y = np.concatenate([y, pad])
    psi = np.concatenate([psi, np.zeros(pad.size)])
    psi[0] = 1.0 if abs(psi[0] - 1.0) < 1e-12 else psi[0]

    t = np.arange(count) * t_step
    decay = {b: SAFETY * float(np.max(np.abs(phi) * (1 + t ** b))) for b in DECAY_ORDERS}
    return SmoothingKernel(alpha_support=float(a), support_A=2.0 * a, alpha_step=dx, alpha_norm=norm,
                           psi_grid=y, psi_values=psi, phi_step=t_step, phi_values=phi,
                           decay_constants=decay, self_check=err)


@lru_cache(maxsize=4)
def default_smoothing_kernel(a: float = 0.5) -> SmoothingKernel:
    return build_smoothing_kernel(a)


class SharpCutoff:
    """Indicator of [-1, 1] standing in for psi; for self-consistency checks."""
    support_A = 1.0

    def psi(self, y):
        y = np.abs(np.asarray(y, dtype=np.float64))
        return (y <= 1.0).astype(np.float64)


# ---- ell(n) ----------------------------------------------------------------------

def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for b in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(b, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _iroot(n: int, k: int) -> int:
    r = int(round(n ** (1.0 / k)))
    for c in (r - 1, r, r + 1):
        if c > 0 and c ** k == n:
            return c
    return 0


@dataclass(frozen=True)
class EllWeight:
    """Dirichlet coefficient of log zeta: 1/k at n = p^k, else 0."""
    n: int
    value: float
    prime: int = 0
    power: int = 0

    @classmethod
    def of(cls, n: int) -> "EllWeight":
        n = int(n)
        if n < 2:
            raise DomainError("ell(n) is defined for n >= 2")
        for k in range(n.bit_length(), 0, -1):
            p = _iroot(n, k)
            if p and _is_prime(p):
                return cls(n, 1.0 / k, p, k)
        return cls(n, 0.0)


def ell(n: int) -> float:
    return EllWeight.of(n).value


# ---- prime-power sums ------------------------------------------------------------

def _require(table: PrimeTable, log_x: float) -> None:
    if log_x > math.log(table.limit) + 1e-12:
        raise DomainError(f"sum needs primes up to e^{log_x:.4g} = {math.exp(log_x):.6g}; "
                          f"table limit is {table.limit}")


def lambda_psi_terms(table: PrimeTable, tau: float, H: float, kernel, sigma: float = 0.5):
    """Yield (k, contribution) for each prime power order k with k log 2 <= A H."""
    if H <= 0:
        raise DomainError("H must be positive")
    cut = kernel.support_A * H
    _require(table, cut)
    k = 1
    while k * math.log(2) <= cut:
        p, lp = table.upto(math.exp(cut / k) * (1 + 1e-15))
        keep = k * lp <= cut
        p, lp = p[keep], lp[keep]
        w = kernel.psi(k * lp / H)
        yield k, complex(np.sum(w * dirichlet_terms(p, sigma, tau, k)) / k)
        k += 1


def lambda_psi(table: PrimeTable, tau: float, H: float, kernel, sigma: float = 0.5) -> complex:
    """Sum of ell(n) n^{-sigma-i tau} psi(log n / H) over prime powers with log n <= A H."""
    terms = [c for _, c in lambda_psi_terms(table, tau, H, kernel, sigma)]
    return complex(math.fsum(c.real for c in terms), math.fsum(c.imag for c in terms))


def prime_sum_sharp(table: PrimeTable, tau: float, H: float, k_shift: float = 0.0) -> complex:
    """Sum of p^{-1/2 - i(tau + k_shift)} over primes p <= e^H."""
    _require(table, H)
    p, lp = table.upto(math.exp(H) * (1 + 1e-15))
    keep = lp <= H
    p, lp = p[keep], lp[keep]
    terms = dirichlet_terms(p, 0.5, tau)
    if k_shift:
        terms = terms * np.exp(-1j * k_shift * lp)
    return complex(np.sum(terms))


@dataclass(frozen=True)
class Discrepancy:
    tau: float
    H: float
    power_tail: float
    smooth_vs_sharp: float
    square_part: float


def cutoff_discrepancy(table: PrimeTable, tau: float, H: float, kernel) -> Discrepancy:
    """How far Lambda_psi is from its prime part, and that from the sharp prime sum."""
    parts = dict(lambda_psi_terms(table, tau, H, kernel))
    tail = sum(c for k, c in parts.items() if k >= 2)
    top = max(H, kernel.support_A * H)
    _require(table, top)
    p, lp = table.upto(math.exp(top) * (1 + 1e-15))
    keep = lp <= top
    p, lp = p[keep], lp[keep]
    weight = (lp <= H).astype(np.float64) - kernel.psi(lp / H)
    svs = complex(np.sum(weight * dirichlet_terms(p, 0.5, tau)))
    return Discrepancy(tau=float(tau), H=float(H), power_tail=abs(tail),
                       smooth_vs_sharp=abs(svs), square_part=abs(parts.get(2, 0.0)))


def discrepancy_sweep(table: PrimeTable, taus, H: float, kernel) -> list[Discrepancy]:
    return [cutoff_discrepancy(table, float(t), H, kernel) for t in taus]


def write_discrepancy_csv(path: Path | str, records: list[Discrepancy]) -> None:
    write_csv(path, ["tau", "H", "power_tail", "smooth_vs_sharp"],
              [(r.tau, r.H, r.power_tail, r.smooth_vs_sharp) for r in records])


# ---- the averaged integral of log zeta ----------------------------------------------

@dataclass(frozen=True)
class AveragedLogZeta:
    value: complex
    error_estimate: float
    truncation: float
    n_zeros: int
    advisory: bool


def pole_correction(sigma: float, tau: float, H: float, kernel, nodes: int = 64) -> complex:
    """Contribution of the pole at s = 1 separating the line Re s = sigma from Re s > 1.

    For sigma < 1 the averaged integral equals Lambda_psi plus
    -2 pi * integral over b in [0, 1 - sigma] of V(-tau - i b), V(z) = H phi(H z),
    and phi(z) = alpha_hat(z)^2 / 2pi continues to the complex plane.
    """
    if sigma >= 1:
        return 0j
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (1 - sigma)
    b = half * (x + 1)
    ah = kernel.alpha_hat(-H * tau - 1j * H * b)
    return complex(-H * np.sum(w * ah ** 2) * half)


def _tanh_sinh(lo: np.ndarray, hi: np.ndarray, step: float, umax: float = 3.2):
    """Nodes and weights on each [lo_i, hi_i], with endpoint offsets kept exact."""
    u = np.arange(-int(umax / step), int(umax / step) + 1) * step
    q = np.exp(-math.pi * np.sinh(np.abs(u)))
    off = 2 * q / (1 + q)                                  # distance to the nearer end, in half-widths
    wt = step * (math.pi / 2) * np.cosh(u) * 4 * q / (1 + q) ** 2
    r = 0.5 * (hi - lo)
    left = u < 0
    x = np.where(left[None, :], lo[:, None] + r[:, None] * off[None, :],
                 hi[:, None] - r[:, None] * off[None, :])
    d = r[:, None] * off[None, :]
    return x, wt[None, :] * r[:, None], d


def _critical_line(tau: float, H: float, kernel, cfg, radius: float, tol: float):
    lo, hi = tau - radius / H, tau + radius / H
    if lo < 10.0:
        raise DomainError("the averaging window reaches below height 10")
    win = zmod.window_arg(lo, hi, cfg)
    edges = np.concatenate([[lo], win.zeros, [hi]])
    counts = win.n_a + np.arange(edges.size - 1)          # N(t) on each open segment
    a, b = edges[:-1], edges[1:]
    prev = None
    for level in range(6):
        step = 0.5 / 2 ** level
        x, w, d = _tanh_sinh(a, b, step)
        keep = d > 64 * np.finfo(float).eps * np.abs(x)
        z = np.abs(zmod.riemann_siegel_Z(np.where(keep, x, tau).ravel(), cfg)).reshape(x.shape)
        re = np.log(np.where(keep, z, 1.0))
        im = math.pi * (counts[:, None] - 1) - zmod.theta_rs(x)
        ker = H * kernel.phi(H * (x - tau)) * w * keep
        val = complex(np.sum(ker * re), np.sum(ker * im))
        # first-order effect of the Riemann-Siegel error on log|Z|
        rs = float(np.sum(np.abs(ker) * zmod.rs_error_budget(x, cfg.rs_correction_terms) / np.maximum(z, 1e-300)))
        if prev is not None and abs(val - prev) < tol:
            return val, abs(val - prev) + rs, win.zeros.size
        prev = val
    return prev, abs(val - prev) + rs, win.zeros.size


def _off_line(sigma: float, tau: float, H: float, kernel, cfg, radius: float, tol: float):
    """Trapezoid rule on the phi grid, log zeta continued along the vertical line."""
    lo = tau - radius / H
    if lo < 10.0 and sigma <= 1:
        raise DomainError("the averaging window reaches below height 10")
    base = kernel.phi_step
    stride = 1 << 6
    n = min(int(math.ceil(radius / base / stride)) * stride, kernel.phi_values.size - 1)
    n -= n % stride
    while stride > 1 and stride * base > 0.25:
        stride //= 2
    t = np.arange(-n, n + 1) * base
    vals: dict[int, complex] = {}

    def logzeta(idx: np.ndarray) -> np.ndarray:
        need = [i for i in idx if i not in vals]
        if need:
            s = sigma + 1j * (tau + t[need] / H)
            zv = zmod.zeta_euler_maclaurin(s, cfg, tol=1e-12)
            for i, v in zip(need, zv):
                vals[int(i)] = v
        return np.array([vals[int(i)] for i in idx])

    prev = None
    while True:
        idx = np.arange(0, t.size, stride)
        zv = logzeta(idx)
        if sigma > 1.25:
            lz = np.log(zv)
        else:
            ph = np.angle(zv)
            jumps = np.abs(np.diff(np.unwrap(ph)))
            if jumps.size and jumps.max() > math.pi / 4:
                if stride == 1:
                    raise NumericalError("phase of zeta not resolved on the finest grid")
                stride //= 2
                continue
            mid = idx.size // 2
            anchor = zmod.unwind_arg(float(tau + t[idx[mid]] / H), sigma, cfg).im_log_zeta
            unw = np.unwrap(ph)
            unw += anchor - unw[mid]
            lz = np.log(np.abs(zv)) + 1j * unw
        val = complex(np.sum(kernel.phi_values[np.abs(idx - n)] * lz) * stride * base)
        if prev is not None and abs(val - prev) < tol:
            return val, abs(val - prev)
        if stride == 1:
            return val, abs(val - prev) if prev is not None else float("nan")
        prev = val
        stride //= 2


def averaged_log_zeta(sigma: float, tau: float, H: float, kernel, zeta_cfg=zmod.DEFAULT_CONFIG,
                      trunc: float | None = None, tol: float = 1e-9, max_zeros: int = 2000
                      ) -> AveragedLogZeta:
    """Integral of log zeta(sigma + i(tau + t/H)) phi(t) dt over |t| <= trunc.

    On the critical line the integrand is split at the zeros in the window
    (log singularities, unit jumps of the counting function) and each piece is
    integrated by tanh-sinh; off the line a trapezoid rule on the phi grid is
    spectrally accurate.
    """
    if not 0.5 <= sigma <= 2:
        raise DomainError("sigma must lie in [1/2, 2]")
    if tau < 10:
        raise DomainError("tau must be >= 10")
    if H <= 0:
        raise DomainError("H must be positive")
    if trunc is None:
        trunc = kernel.truncation_radius(1e-8)
    trunc = min(trunc, kernel.phi_radius)
    if sigma == 0.5:
        val, err, nz = _critical_line(tau, H, kernel, zeta_cfg, trunc, tol)
    else:
        val, err = _off_line(sigma, tau, H, kernel, zeta_cfg, trunc, tol)
        nz = 0
    return AveragedLogZeta(value=val, error_estimate=err + kernel.tail_mass(trunc) * math.log(2 + tau),
                           truncation=trunc, n_zeros=nz, advisory=nz > max_zeros)
