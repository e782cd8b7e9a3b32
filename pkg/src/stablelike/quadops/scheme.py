"""
Quadrature rules for singular jump integrals in polar coordinates.

Radial integrals are split into segments at structural breakpoints and laid
out on Gauss-Legendre panels that are geometric in the radius (with a
log-radius substitution) and, where a field declares a length scale, capped
in width.  Angular rules are exact sign sums in d = 1, periodic trapezoid
rules in d = 2 and Gauss-Legendre in the polar cosine times a trapezoid in
azimuth in d = 3.  All angular rules are symmetric under z -> -z and under
the reflection across the hyperplane orthogonal to the first frame vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "QuadratureScheme",
    "QuadratureError",
    "QuadResult",
    "Segment",
    "frame_from_axis",
    "sphere_rule",
    "radial_rule",
    "polar_integral",
    "wynn_epsilon",
]


class QuadratureError(RuntimeError):
    """Tolerance not met after the maximal refinement; ``estimate`` holds the achieved error."""

    def __init__(self, message, estimate=math.nan, value=math.nan, where=None):
        super().__init__(message)
        self.estimate = estimate
        self.value = value
        self.where = where


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    level: int = 0


@dataclass(frozen=True)
class QuadratureScheme:
    """Parameters of the polar quadrature.

    :param rho_in: radius below which a second-order Taylor correction replaces the integrand
    :param r_out: tail truncation radius; None chooses it per call from ``tol_abs``
    :param panels_per_decade: geometric panels per decade at level 0
    :param panel_order: Gauss-Legendre nodes per panel
    :param angular_order: trapezoid nodes in d = 2 (azimuth nodes in d = 3) at level 0
    :param tol_abs, tol_rel: accuracy target tol_abs + tol_rel |value|
    :param max_level: maximal number of refinement doublings
    :param shells: half-period shells summed by epsilon extrapolation for oscillatory fields
    """

    rho_in: float = 1e-4
    r_out: float | None = None
    panels_per_decade: int = 4
    panel_order: int = 8
    angular_order: int = 32
    tol_abs: float = 1e-8
    tol_rel: float = 1e-7
    max_level: int = 4
    shells: int = 40

    def __post_init__(self):
        if not 0.0 < self.rho_in < 1.0:
            raise ValueError("rho_in must lie in (0, 1)")
        if self.r_out is not None and self.r_out <= 1.0:
            raise ValueError("r_out must exceed 1")
        if self.panels_per_decade < 1 or self.panel_order < 2 or self.angular_order < 4:
            raise ValueError("invalid quadrature resolution")
        if self.angular_order % 2:
            raise ValueError("angular order must be even (antipodal symmetry)")
        if self.tol_abs <= 0 or self.tol_rel < 0:
            raise ValueError("tolerances must be positive")

    def tail_radius(self, coef, alpha0, floor=10.0):
        """Smallest R >= floor with coef R^{-alpha0} <= tol_abs / 20."""
        if coef <= 0:
            return max(floor, self.r_out or floor)
        R = (20.0 * coef / self.tol_abs) ** (1.0 / alpha0)
        if self.r_out is not None:
            R = self.r_out
        return max(R, floor)


@dataclass
class Segment:
    """Radial interval [a, b] with a width cap and flags passed to the integrand."""

    a: float
    b: float
    cap: float = math.inf
    flags: dict = field(default_factory=dict)
    angular: object = None   # callable rho -> order multiplier, for oscillatory fields


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    t, w = np.polynomial.legendre.leggauss(n)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def frame_from_axis(axis, d):
    """Orthonormal frame (rows) whose first vector is ``axis``."""
    if axis is None:
        return np.eye(d)
    v = np.asarray(axis, dtype=float).reshape(d)
    v = v / np.linalg.norm(v)
    if d == 1:
        return np.array([[1.0]])
    M = np.eye(d)
    k = int(np.argmin(np.abs(v)))
    basis = [v]
    for i in range(d):
        if len(basis) == d:
            break
        e = M[(k + i) % d]
        for b in basis:
            e = e - (e @ b) * b
        n = np.linalg.norm(e)
        if n > 1e-8:
            basis.append(e / n)
    return np.array(basis)


def _sphere_rule_cached(d, m):
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        th = 0.5 * math.pi + 2.0 * math.pi * np.arange(m) / m
        return np.column_stack([np.cos(th), np.sin(th)]), np.full(m, 2.0 * math.pi / m)
    if d == 3:
        nt = max(m // 2, 2)
        t, wt = _gauss_legendre(nt)
        psi = 2.0 * math.pi * (np.arange(m) + 0.5) / m
        T, P = np.meshgrid(t, psi, indexing="ij")
        s = np.sqrt(1.0 - T ** 2)
        dirs = np.column_stack([T.ravel(), (s * np.cos(P)).ravel(), (s * np.sin(P)).ravel()])
        w = (wt[:, None] * np.full(m, 2.0 * math.pi / m)[None, :]).ravel()
        return dirs, w
    raise ValueError("angular rules are provided for d <= 3")


_SPHERE_CACHE = {}


def sphere_rule(d, m, frame=None):
    """Directions (M, d) and weights summing to the sphere area, aligned with ``frame``."""
    key = (d, m)
    if key not in _SPHERE_CACHE:
        _SPHERE_CACHE[key] = _sphere_rule_cached(d, m)
    dirs, w = _SPHERE_CACHE[key]
    if frame is not None and d > 1:
        dirs = dirs @ frame
    return dirs, w


def radial_rule(a, b, level, scheme, cap=math.inf):
    """Nodes and weights for int_a^b g(rho) d rho on geometric panels (capped in width)."""
    ppd = scheme.panels_per_decade * 2 ** level
    t, w = _gauss_legendre(scheme.panel_order)
    npan = max(1, int(math.ceil(ppd * math.log10(b / a) - 1e-9)))
    edges = np.geomspace(a, b, npan + 1)
    cap = cap / 2 ** level
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = 1 if not math.isfinite(cap) else max(1, int(math.ceil((hi - lo) / cap - 1e-9)))
        if k == 1 and hi / lo > 1.05:
            # log substitution rho = exp(s)
            sl, sh = math.log(lo), math.log(hi)
            s = 0.5 * (sh - sl) * t + 0.5 * (sh + sl)
            rho = np.exp(s)
            nodes.append(rho)
            weights.append(0.5 * (sh - sl) * w * rho)
        else:
            sub = np.linspace(lo, hi, k + 1)
            for p, q in zip(sub[:-1], sub[1:]):
                nodes.append(0.5 * (q - p) * t + 0.5 * (q + p))
                weights.append(0.5 * (q - p) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def polar_integral(func, d, frame, segments, level, scheme):
    """Sum over segments of int_seg int_S func(rho theta) rho^{d-1} d theta d rho.

    ``func(Z, flags)`` receives points Z (N, d) and returns (N,) or (N, k).
    """
    total = None
    base_m = scheme.angular_order * 2 ** level
    for seg in segments:
        if seg.b <= seg.a:
            continue
        rho, wr = radial_rule(seg.a, seg.b, level, scheme, seg.cap)
        wr = wr * rho ** (d - 1)
        # group radial nodes that share an angular order
        if seg.angular is None or d == 1:
            groups = [(np.arange(rho.size), base_m)]
        else:
            ms = np.array([_even(base_m * seg.angular(r)) for r in rho])
            groups = [(np.nonzero(ms == m)[0], m) for m in np.unique(ms)]
        for idx, m in groups:
            dirs, wa = sphere_rule(d, m, frame)
            Z = (rho[idx, None, None] * dirs[None, :, :]).reshape(-1, d)
            vals = np.asarray(func(Z, seg.flags))
            vals = vals.reshape((idx.size, dirs.shape[0]) + vals.shape[1:])
            part = np.tensordot(wr[idx], np.tensordot(wa, vals, axes=([0], [1])), axes=([0], [0]))
            total = part if total is None else total + part
    return 0.0 if total is None else total


def _even(x):
    m = int(math.ceil(x))
    return m + (m % 2)


def wynn_epsilon(partial_sums):
    """Epsilon-algorithm limit of a sequence of partial sums with an error estimate.

    Returns (limit, error) where the error is the distance between the two
    most recent even-column estimates.
    """
    s = [float(v) for v in partial_sums]
    n = len(s)
    if n < 3:
        return s[-1], abs(s[-1] - s[-2]) if n == 2 else math.inf
    prev = [0.0] * (n + 1)
    cur = list(s)
    estimates = []
    k = 0
    while len(cur) > 1:
        nxt = []
        for i in range(len(cur) - 1):
            diff = cur[i + 1] - cur[i]
            if diff == 0.0:
                nxt.append(math.inf)
            else:
                nxt.append(prev[i + 1] + 1.0 / diff)
        prev, cur = cur, nxt
        k += 1
        if k % 2 == 0 and cur and math.isfinite(cur[-1]):
            estimates.append(cur[-1])
    if not estimates:
        return s[-1], abs(s[-1] - s[-2])
    best = estimates[-1]
    if len(estimates) >= 2:
        err = abs(estimates[-1] - estimates[-2])
    else:
        err = abs(best - s[-1])
    return best, err
