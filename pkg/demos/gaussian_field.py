"""Draw the banded prime-sum field, its random-phase model and its Gaussian model side by side."""
import warnings

import numpy as np

from zetamax import surrogate as sur
from zetamax.primes import sieve

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    cfg = sur.derive_config(1e8, 1.0, 0.1, 3)
table = sieve(int(np.exp(cfg.H)) + 1)
print(f"H = {cfg.H}, band edges log x_m = {np.round(cfg.log_edges, 3)}")

s = sur.truncate(sur.s_field(cfg, 0.4321, table), cfg)
print("one clamped prime-sum field, rows k = 0..3:\n", np.round(s.values[:4], 3))

n = 4096
v = np.stack([f.values for f in sur.v_fields(cfg, table, 1, range(n)).values()])
g = np.stack([f.values for f in sur.g_fields(cfg, 1, range(n)).values()])
print("Var V(0, m) over", n, "draws:", np.round(v[:, 0].var(axis=0), 3))
print("exact band sums of 1/(2p):  ", np.round(sur.band_variance(cfg, table), 3))
print("Var G(0, m) over", n, "draws:", np.round(g[:, 0].var(axis=0), 3))
print("Gaussian target log H/(2K):  ", round(np.log(cfg.H) / (2 * cfg.K), 3))
