"""
Drift of the coupled distance
=============================

The coupling operator applied to f_n(|x - y|) is negative for small
separations.  For the power test function r^beta with a constant index the
profile decays like r^(beta - alpha).
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from stablelike import make_constant_spec
from stablelike.quadops import (QuadratureScheme, build_test_function, default_smoothing_index,
                                drift_profile)

spec = make_constant_spec(1, 1.5, 1.0)
q = QuadratureScheme(tol_abs=1e-7, tol_rel=1e-6)
r = np.geomspace(1e-3, 1e-1, 9)
tf = build_test_function("power", n=default_smoothing_index(r[0]), beta=0.5)
rep = drift_profile(spec, tf, q, r_grid=r)

# fitted exponent of -L f_n against r, target beta - alpha = -1
print(f"slope {rep.slope:.3f} +- {rep.slope_se:.3f}, eps0 {rep.eps0:.3g}, C0 {rep.C0:.3g}")

fig, ax = plt.subplots()
ax.loglog(rep.r, -rep.values, "o", label="-L f_n(r)")
ax.loglog(rep.r, -rep.negativity_bound, "k--", label="C0 r^(beta - alpha0)")
ax.set_xlabel("r")
ax.legend()
fig.savefig("drift_profile.png", dpi=120)
