"""Evaluate Z(t), locate zeros and count them, comparing two evaluation routes."""
import numpy as np

from zetamax import zeta as z

for t in (50.0, 1000.5, 123456.789):
    rs = float(z.riemann_siegel_Z(t))
    em = abs(complex(z.zeta_euler_maclaurin(0.5 + 1j * t)))
    print(f"t = {t:>11}: Z = {rs:+.10f}   |zeta| by Euler-Maclaurin = {em:.10f}")

zeros = z.zeros_in(10, 50)
print("zeros in [10, 50]:", np.round(zeros, 6))
for t in (100, 1000, 10_000):
    n = z.count_zeros(t)
    print(f"N({t}) = {n}, fluctuation N - theta/pi - 1 = {n - z.theta_rs(t) / np.pi - 1:+.4f}")
