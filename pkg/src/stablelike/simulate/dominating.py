"""
The dominating jump measure used for thinning.

g(z) = c2 |z|^{-d-a2} on {delta < |z| <= 1} and c2 |z|^{-d-a0} on {|z| > 1}
majorises n(x, z)/|z|^{d+alpha(x)} for every x because alpha takes values in
[a0, a2] and n <= c2.  Radii are drawn by inverting the piecewise power-law
CDF, directions uniformly on the sphere.
"""

from __future__ import annotations

import math

import numpy as np

from ..model import sphere_area
from . import _engine
from .rng import CounterRNG

__all__ = [
    "Majorant",
    "majorant",
    "sample_dominating_jump",
    "radius_cdf",
    "radius_quantile",
    "check_domination",
]


class Majorant:
    """Parameters (c2, a0, a2, delta) of the dominating measure.

    ``exact`` marks spatially homogeneous isotropic kernels with a constant
    index, for which g equals the jump density and every candidate is accepted.
    """

    def __init__(self, d, c2, a0, a2, delta, exact=False):
        if not 0.0 < delta < 1.0:
            raise ValueError("small-jump cutoff must lie in (0, 1)")
        if not 0.0 < a0 <= a2 < 2.0:
            raise ValueError("index bounds must satisfy 0 < a0 <= a2 < 2")
        self.d, self.c2, self.a0, self.a2, self.delta = d, float(c2), float(a0), float(a2), float(delta)
        self.exact = bool(exact)
        om = sphere_area(d)
        self.inner_mass = om * self.c2 * (self.delta ** (-self.a2) - 1.0) / self.a2
        self.outer_mass = om * self.c2 / self.a0
        self.total_mass = self.inner_mass + self.outer_mass

    def density(self, z):
        z = np.asarray(z, dtype=float).reshape(-1, self.d)
        rho = np.linalg.norm(z, axis=1)
        a = np.where(rho <= 1.0, self.a2, self.a0)
        return np.where(rho > self.delta, self.c2 * rho ** (-(self.d + a)), 0.0)


def majorant(spec, delta):
    """Dominating measure for ``spec`` with small-jump cutoff ``delta``."""
    homogeneous = (spec.index.is_constant and not spec.kernel.x_dependent
                   and not spec.kernel.z_dependent)
    if homogeneous:
        # the majorant coincides with the density: no thinning needed
        e1 = np.zeros(spec.d)
        e1[0] = 1.0
        c = float(spec.n(np.zeros(spec.d), e1))
        a = spec.alpha_min
        return Majorant(spec.d, c, a, a, delta, exact=True)
    return Majorant(spec.d, spec.c_upper, spec.alpha_min, spec.alpha_max, delta)


def radius_cdf(m, r):
    """P(|Z| <= r) under the normalised dominating measure."""
    r = np.asarray(r, dtype=float)
    inner = m.inner_mass * (m.delta ** (-m.a2) - np.clip(r, m.delta, 1.0) ** (-m.a2)) \
        / (m.delta ** (-m.a2) - 1.0)
    outer = m.outer_mass * (1.0 - np.maximum(r, 1.0) ** (-m.a0))
    return np.where(r <= m.delta, 0.0, (inner + outer) / m.total_mass)


def radius_quantile(m, u):
    """Inverse of :func:`radius_cdf` (the map used by the sampler)."""
    u = np.asarray(u, dtype=float)
    p_in = m.inner_mass / m.total_mass
    dneg = m.delta ** (-m.a2)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = (dneg - (u / p_in) * (dneg - 1.0)) ** (-1.0 / m.a2)
        outer = (1.0 - (u - p_in) / (1.0 - p_in)) ** (-1.0 / m.a0)
    return np.where(u < p_in, inner, outer)


def sample_dominating_jump(rng, spec, delta=1e-4, count=None, path=0):
    """Candidate jumps of one path stream and their dominating density values.

    :param rng: :class:`CounterRNG`
    :returns: (z, g) for a single draw, or arrays (count, d), (count,)
    """
    m = majorant(spec, delta)
    n = 1 if count is None else int(count)
    Z, G = _engine.sample_candidates(spec.d, rng.seed_u64, np.uint64(rng.path_offset + path), n,
                                     m.delta, m.a0, m.a2, m.c2)
    if count is None:
        return Z[0], float(G[0])
    return Z, G


def check_domination(spec, delta, states=10_000, seed=0, jumps=16):
    """Largest ratio density/majorant over random states and jumps (must be <= 1).

    Coupled components are bounded by the marginal densities, whose sum is
    dominated by twice the marginal majorant, so this check covers both.
    """
    m = majorant(spec, delta)
    rng = np.random.default_rng(seed)
    X = rng.uniform(-5, 5, size=(states, spec.d))
    worst = 0.0
    for j in range(jumps):
        Z = rng.normal(size=(states, spec.d))
        Z *= (np.exp(rng.uniform(math.log(delta), 3.0, size=(states, 1)))
              / np.linalg.norm(Z, axis=1, keepdims=True))
        ratio = spec.density(X, Z) / m.density(Z)
        worst = max(worst, float(np.max(ratio)))
    return worst
