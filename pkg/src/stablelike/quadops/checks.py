"""
Numerical checks of the structural assumptions and of the elementary
inequalities behind the drift estimates.

Assumption curves are sampled suprema over a fixed set of base points x_i
and unit directions u_i, with y_i = x_i + r u_i at every radius r, so that
curves at different radii are directly comparable.  Verdicts on the curves
(decay towards r -> 0) are advisory.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from ..model import ReferenceFunction, continuity_modulus_A, psi
from .operators import DEFAULT_SCHEME, h4_integral

__all__ = [
    "AssumptionReport",
    "check_assumptions",
    "lemma33_check",
    "scalar_inequality_suite",
    "sample_bounds",
]


@dataclass
class AssumptionReport:
    """Decay curves of the assumption quantities against the radius.

    :ivar radii: decreasing radius grid
    :ivar curves: name -> array over ``radii``
    :ivar verdicts: name -> bool (curve non-increasing as r decreases, within tolerance)
    :ivar class_diagnostics: reference-function diagnostics at r = 10^{-k} (if phi given)
    """

    radii: np.ndarray
    samples: int
    probes: int
    curves: dict
    verdicts: dict
    class_diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        conv = lambda v: v.tolist() if isinstance(v, np.ndarray) else v
        out = asdict(self)
        out["radii"] = conv(self.radii)
        out["curves"] = {k: conv(v) for k, v in self.curves.items()}
        out["class_diagnostics"] = {k: conv(v) for k, v in self.class_diagnostics.items()}
        return out

    def rows(self):
        names = sorted(self.curves)
        cols = ("r",) + tuple(names)
        return cols, [(float(r),) + tuple(float(self.curves[k][i]) for k in names)
                      for i, r in enumerate(self.radii)]


def _base_points(d, samples, seed, spread=1.5):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-spread, spread, size=(samples, d))
    if d == 1:
        U = np.where(rng.uniform(size=(samples, 1)) < 0.5, -1.0, 1.0)
    else:
        U = rng.normal(size=(samples, d))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
    return X, U


def _decays(curve, rel=1e-6, abs_tol=1e-10):
    """Non-increasing as r decreases (the grid is decreasing), with slack."""
    c = np.asarray(curve, dtype=float)
    if not np.all(np.isfinite(c)):
        return False
    steps = np.diff(c)
    slack = abs_tol + rel * np.abs(c[:-1])
    return bool(np.all(steps <= slack))


def check_assumptions(spec, phi=None, radii=None, samples=64, *, probes=1000, h4_samples=16,
                      q=None, seed=0):
    """Sampled decay curves for the structural assumptions.

    Curves: ``H2`` sup |da| log(1/r); ``H3_x`` sup_{|z|<=1}|n(x,z)-n(y,z)|;
    ``H3_z`` sup_{|z1-z2|<=r}|n(w,z1)-n(w,z2)|; ``H4`` sup |h4 integral|;
    ``P18`` (|da| + sup_{|z|<=1}|n(x,z)-n(y,z)|)/r^{1-a}; with ``phi`` also
    ``A_over_Psi`` (the continuity modulus over Psi).

    :param radii: decreasing radii in (0, 1]; default 10^{-1}, ..., 10^{-4}
    :param samples: base points per radius for the sampled suprema
    :param h4_samples: base points (out of ``samples``) used for the H4 quadrature
    """
    q = DEFAULT_SCHEME if q is None else q
    d = spec.d
    radii = np.logspace(-1, -4, 4) if radii is None else np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) >= 0) or radii[0] > 1 or radii[-1] <= 0:
        raise ValueError("radii must decrease within (0, 1]")
    X, U = _base_points(d, samples, seed)
    kern = spec.kernel
    zprobe = _unit_ball(d, probes, seed)
    curves = {k: np.zeros(radii.size) for k in ("H2", "H3_x", "H3_z", "H4", "P18")}
    if phi is not None:
        curves["A_over_Psi"] = np.zeros(radii.size)
    for i, r in enumerate(radii):
        Y = X + r * U
        ax, ay = spec.alpha(X), spec.alpha(Y)
        da = np.abs(ax - ay)
        amin = np.minimum(ax, ay)
        curves["H2"][i] = float(np.max(da)) * math.log(1.0 / r)
        sup1 = np.zeros(samples)
        if kern.x_dependent:
            for j in range(samples):
                sup1[j] = float(np.max(np.abs(kern(X[j], zprobe) - kern(Y[j], zprobe))))
        curves["H3_x"][i] = float(np.max(sup1))
        if kern.z_dependent:
            z1 = 3.0 * zprobe
            z2 = z1 + r * np.roll(_unit_dirs(d, probes, seed + 1), 1, axis=0)
            curves["H3_z"][i] = max(float(np.max(np.abs(kern(w, z1) - kern(w, z2)))) for w in X)
        curves["P18"][i] = float(np.max((da + sup1) / r ** (1.0 - amin)))
        hv = [abs(h4_integral(spec, X[j], Y[j], q)) for j in range(min(h4_samples, samples))]
        curves["H4"][i] = max(hv) if hv else 0.0
        if phi is not None:
            A = max(continuity_modulus_A(spec, X[j], Y[j], "thm15", probes=probes, seed=seed)
                    for j in range(min(h4_samples, samples)))
            curves["A_over_Psi"][i] = A / psi(phi, r)
    verdicts = {k: _decays(v) for k, v in curves.items()}
    diag = class_diagnostics(phi, spec.alpha_min) if phi is not None else {}
    if diag:
        verdicts["class_D"] = bool(diag["in_class_D"])
        verdicts["class_D_theta"] = bool(diag["limit_decays"] and diag["limsup_ok"])
    return AssumptionReport(radii, samples, probes, curves, verdicts, diag)


def _unit_ball(d, count, seed):
    rng = np.random.default_rng(seed + 17)
    if d == 1:
        return np.linspace(-1.0, 1.0, count)[:, None]
    g = rng.normal(size=(count, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.uniform(size=(count, 1)) ** (1.0 / d)


def _unit_dirs(d, count, seed):
    rng = np.random.default_rng(seed)
    if d == 1:
        return np.where(rng.uniform(size=(count, 1)) < 0.5, -1.0, 1.0)
    g = rng.normal(size=(count, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def class_diagnostics(phi, theta, kmax=8):
    """Limits defining the reference class at r = 10^{-k}, k = 1..kmax.

    ``limit``: r^{theta-2}/phi'(r) + phi'(2r) r/phi(r) (should tend to 0);
    ``ratio``: phi''(r) r/phi'(r) (limsup should stay below theta - 2).
    """
    r = 10.0 ** -np.arange(1, kmax + 1, dtype=float)
    limit = r ** (theta - 2.0) / phi.dphi(r) + phi.dphi(2 * r) * r / phi.phi(r)
    ratio = phi.d2phi(r) * r / phi.dphi(r)
    tail = ratio[len(r) // 2:]
    return {
        "r": r,
        "theta": float(theta),
        "limit": limit,
        "ratio": ratio,
        "psi": -phi.dphi(2 * r) * r / phi.phi(r),
        "in_class_D": phi.in_class_D(),
        "limit_decays": _decays(np.abs(limit), rel=1e-9, abs_tol=0.0),
        "limsup_ok": bool(np.max(tail) < theta - 2.0),
    }


def sample_bounds(spec, samples=100_000, seed=0, spread=5.0):
    """Largest violations of the declared index and kernel bounds on random samples."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-spread, spread, size=(samples, spec.d))
    Z = rng.normal(size=(samples, spec.d)) * np.exp(rng.uniform(-4, 2, size=(samples, 1)))
    a = spec.alpha(X)
    n = spec.n(X, Z)
    return {
        "alpha_low": float(max(0.0, np.max(spec.alpha_min - a))),
        "alpha_high": float(max(0.0, np.max(a - spec.alpha_max))),
        "kernel_low": float(max(0.0, np.max(spec.c_lower - n))),
        "kernel_high": float(max(0.0, np.max(n - spec.c_upper))),
    }


# ---------------------------------------------------------------------------
# second-difference and elementary inequalities
# ---------------------------------------------------------------------------

def _second_difference(phi, a, delta):
    """F(a+delta) + F(a-delta) - 2F(a) as int_0^delta (phi(a+u) - phi(a-u)) du."""
    if delta == 0.0:
        return 0.0
    g = lambda u: float(phi.phi(a + u) - phi.phi(a - u))
    pts = None if delta < a else [delta]
    val, _ = integrate.quad(g, 0.0, delta, epsabs=1e-15, epsrel=1e-13, limit=200, points=pts)
    return val


def lemma33_check(phi, grid=None, size=24):
    """Max over (a, delta) of F(a+d) + F(a-d) - 2F(a) - phi'(2a) d^2, with 0 <= d <= a <= 1.

    The second difference is integrated directly, avoiding the cancellation
    of three nearly equal primitives.

    :param grid: iterable of (a, delta) pairs; default a log grid in a with
        delta = a * {0, 1/size, ..., 1}
    :returns: (max violation, argmax pair)
    """
    if grid is None:
        grid = [(a, a * t) for a in np.geomspace(1e-4, 1.0, size)
                for t in np.linspace(0.0, 1.0, size + 1)]
    worst, where = -math.inf, None
    for a, dl in grid:
        a, dl = float(a), float(dl)
        if not 0.0 <= dl <= a <= 1.0:
            raise ValueError("lemma grid needs 0 <= delta <= a <= 1")
        v = _second_difference(phi, a, dl) - float(phi.dphi(2 * a)) * dl * dl
        if v > worst:
            worst, where = v, (a, dl)
    return worst, where


def scalar_inequality_suite(n=1_000_000, seed=0, phis=None):
    """Largest violations (lhs - rhs) of the four elementary inequalities on random inputs.

    - (1+s)^b + (1-s)^b <= 2 + b(b-1) s^2 for s in [0, 1], b in (0, 1]
    - |w||w+z| - |w|^2 - <w, z> <= |z|^2/2 for w, z in R^d, d = 1, 2, 3
    - b^beta - a^beta <= beta a^{beta-1}(b - a) for a, b > 0
    - F(b) - F(a) <= phi(a)(b - a) for the reference-function presets

    All should be <= 0 up to rounding.
    """
    rng = np.random.default_rng(seed)
    out = {}
    s = rng.uniform(0.0, 1.0, n)
    b = rng.uniform(1e-6, 1.0, n)
    s[:8] = 0.0
    s[8:16] = 1.0
    with np.errstate(divide="ignore"):
        lhs = np.expm1(b * np.log1p(s)) + np.expm1(b * np.log1p(-s))
    out["binomial"] = float(np.max(lhs - b * (b - 1.0) * s * s))

    worst = -math.inf
    for d in (1, 2, 3):
        m = n // 3
        w = rng.normal(size=(m, d)) * np.exp(rng.uniform(-3, 3, size=(m, 1)))
        z = rng.normal(size=(m, d)) * np.exp(rng.uniform(-3, 3, size=(m, 1)))
        nw = np.linalg.norm(w, axis=1)
        lhs = nw * np.linalg.norm(w + z, axis=1) - nw ** 2 - np.einsum("ij,ij->i", w, z)
        rhs = 0.5 * np.einsum("ij,ij->i", z, z)
        scale = nw ** 2 + rhs
        worst = max(worst, float(np.max((lhs - rhs) / scale)))
    out["distance"] = worst

    beta = rng.uniform(1e-3, 1.0, n)
    a = np.exp(rng.uniform(-8, 2, n))
    bb = np.exp(rng.uniform(-8, 2, n))
    bb[:8] = a[:8]
    lhs = bb ** beta - a ** beta
    rhs = beta * a ** (beta - 1.0) * (bb - a)
    out["concave_power"] = float(np.max((lhs - rhs) / (np.abs(lhs) + np.abs(rhs) + 1e-300)))

    phis = phis or (ReferenceFunction.loglog(), ReferenceFunction.logpower(1.0),
                    ReferenceFunction.logpower(2.0))
    worst = -math.inf
    m = max(1, n // len(phis))
    for phi in phis:
        a = rng.uniform(1e-6, 2.0, m)
        bb = rng.uniform(1e-6, 2.0, m)
        bb[:4] = a[:4]
        lhs = phi.F(bb) - phi.F(a)
        rhs = phi.phi(a) * (bb - a)
        worst = max(worst, float(np.max(lhs - rhs)))
    out["primitive"] = worst
    return out
