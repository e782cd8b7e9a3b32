"""
Coupling times and the Holder exponent
======================================

Pairs started at distance r couple before they separate to eps with
probability at least 1 - (r/eps)^beta.  The same mechanism makes
x -> P_t f(x) Holder continuous, which is estimated here with common random
numbers and a weighted log-log slope.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from stablelike import IndexField, make_bass_spec
from stablelike.analyze import holder_fit
from stablelike.fields import ClippedSin
from stablelike.simulate import SimConfig, estimate_coupling_tail

spec = make_bass_spec(1, IndexField.constant(1, 1.5))
eps = 0.2
cfg = SimConfig(t_max=1.0, paths=2000, delta_cut=1e-3, seed=2)

# coupling before separation
pairs = [([0.0], [r]) for r in (eps / 2, eps / 4, eps / 8)]
tail = estimate_coupling_tail(spec, pairs, [0.5, 1.0], eps, cfg, sensitivity=False)
for r, p, s in zip(tail.r, tail.p_exceed, tail.p_exceed_se):
    print(f"r = {r:.3f}: P(T > S_eps) = {p:.3f} +- {s:.3f}, bound {(r / eps) ** 0.5:.3f}")

# Holder fit at t = 0.5
fit = holder_fit(spec, ClippedSin(1), [0.3], [1.0], 0.5, 0.5,
                 cfg.replace(t_max=0.5, paths=20_000), r0=0.1, K=5)
print(f"slope {fit.slope:.3f}, 95% interval {fit.slope_ci}, verdict {fit.verdict}")

fig, ax = plt.subplots()
ax.loglog(fit.r, np.abs(fit.diff), "o", label="|P_t f(x + r) - P_t f(x)|")
ax.loglog(fit.r, fit.envelope, "k--", label="C r^beta")
ax.set_xlabel("r")
ax.legend()
fig.savefig("holder_fit.png", dpi=120)
