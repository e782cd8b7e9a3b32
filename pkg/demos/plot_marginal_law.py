"""
Law of the simulated process
============================

With a constant index and the Bass normalisation the process is symmetric
alpha-stable, so E cos(X_t) = exp(-t) from the origin.  The thinning sampler
is compared with that value at two small-jump cutoffs.
"""

import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from stablelike import IndexField, make_bass_spec
from stablelike.simulate import SimConfig, marginal_terminal

spec = make_bass_spec(1, IndexField.constant(1, 1.2))
t = np.array([0.25, 0.5, 1.0])
cfg = SimConfig(t_max=1.0, paths=20_000, seed=1)

fig, ax = plt.subplots()
for delta in (1e-2, 1e-3):
    est, se = [], []
    for s in t:
        X = marginal_terminal(spec, np.zeros((1, 1)), cfg.replace(delta_cut=delta, t_max=s))
        c = np.cos(X[:, 0, 0])
        est.append(c.mean())
        se.append(c.std(ddof=1) / math.sqrt(c.size))
    print(f"delta_cut {delta:g}: " + ", ".join(f"{m:.4f}" for m in est))
    ax.errorbar(t, est, yerr=3 * np.array(se), fmt="o", capsize=3, label=f"delta_cut {delta:g}")

ax.plot(t, np.exp(-t), "k-", label="exp(-t)")
ax.set_xlabel("t")
ax.set_ylabel("E cos(X_t)")
ax.legend()
fig.savefig("marginal_law.png", dpi=120)
