"""
The generator on plane waves
============================

For the Bass normalisation with a constant index the operator acts on
cos<xi, x> by multiplication with -|xi|^alpha.  The quadrature is checked
against that closed form over a range of frequencies.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from stablelike import IndexField, make_bass_spec
from stablelike.fields import Cosine
from stablelike.quadops import apply_generator

# a grid of wavenumbers and three indices
k = np.geomspace(0.25, 4.0, 9)
fig, ax = plt.subplots()
for alpha in (0.5, 1.0, 1.5):
    spec = make_bass_spec(1, IndexField.constant(1, alpha))
    vals = np.array([apply_generator(spec, Cosine([kk]), [0.0]) for kk in k])
    err = np.max(np.abs(vals + k ** alpha) / k ** alpha)
    print(f"alpha = {alpha}: max relative error {err:.2e}")
    ax.loglog(k, -vals, "o", label=f"quadrature, alpha = {alpha}")
    ax.loglog(k, k ** alpha, "k-", lw=0.8)

ax.set_xlabel("|xi|")
ax.set_ylabel("-L cos(xi .)(0)")
ax.legend()
fig.savefig("eigenrelation.png", dpi=120)
