"""Short-interval maxima of log|zeta| and the Paley-Zygmund count on the Gaussian model."""
import warnings

from zetamax import experiments as ex
from zetamax import surrogate as sur

for T in (1e4, 1e6):
    r = ex.sup_experiment(T, 1.0, 0.5, 64, seed=3, certify=False)
    q = r.results["sup_re_normalized"]["quantiles"]
    print(f"T = {T:.0e}: median sup log|zeta| / log log T = {q['q50']:.3f} (q05 {q['q05']:.3f}, q95 {q['q95']:.3f})")

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    cfg = sur.derive_config(1e8, 1.0, 0.1, 4, H=256)
r = ex.second_moment_J("G", cfg, 0.3, ex.TestFunction(), 256, seed=3)
res = r.results
print(f"P[J > 0] = {res['PJpos']:.3f} >= (EJ)^2/EJ^2 = {res['pz_ratio']:.3f}; checks: {r.checks}")
