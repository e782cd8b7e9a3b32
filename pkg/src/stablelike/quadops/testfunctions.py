"""
Concave radial test functions for the drift estimates.

``power`` kind: f_n(r) = r^2 on [0, 1/(n+1)], r^beta on [1/n, 4], constant
from r = 6 on.  ``modulus`` kind: f_n = F = int_0 phi on [1/n, 2] and
F(2) + 1 from r = 3 on, with a small quadratic piece near 0.  The gaps are
filled by quintic Hermite blends matching value, slope and curvature at both
ends; blends are clamped below the dominating function and the result is
checked for monotonicity and domination on a dense grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TestFunction", "TestFunctionError", "build_test_function"]


class TestFunctionError(ValueError):
    """Monotonicity or domination fails after clamping."""

    __test__ = False

    def __init__(self, message, r=None):
        super().__init__(message)
        self.r = r


def _hermite(p, q, left, right):
    """Coefficients (in s = r - p, increasing powers) of the quintic matching (f, f', f'') at p and q."""
    h = q - p
    A = np.array([
        [1, 0, 0, 0, 0, 0],
        [0, 1, 0, 0, 0, 0],
        [0, 0, 2, 0, 0, 0],
        [1, h, h ** 2, h ** 3, h ** 4, h ** 5],
        [0, 1, 2 * h, 3 * h ** 2, 4 * h ** 3, 5 * h ** 4],
        [0, 0, 2, 6 * h, 12 * h ** 2, 20 * h ** 3],
    ], dtype=float)
    return np.linalg.solve(A, np.r_[left, right])


def _poly(c, s, order):
    c = np.asarray(c)
    for _ in range(order):
        c = c[1:] * np.arange(1, len(c))
    return np.polynomial.polynomial.polyval(s, c)


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Radial profile f_n with value, first and second derivative rules.

    :ivar pieces: list of (lo, hi, kind, data) with kind in
        {"dominant", "quad", "hermite", "const"}
    :ivar breakpoints: radii where the profile changes definition (including clamp switches)
    """

    __test__ = False

    kind: str
    n: int
    params: dict
    pieces: list
    breakpoints: tuple
    sup_norm: float
    saturation_radius: float
    dominant: object = field(repr=False, default=None)
    scale: float = 1.0
    phi: object = field(repr=False, default=None)

    def _eval(self, r, order):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for lo, hi, kind, data in self.pieces:
            m = (r >= lo) & (r < hi) if math.isfinite(hi) else (r >= lo)
            if not np.any(m):
                continue
            rr = r[m]
            if kind == "dominant":
                out[m] = self.dominant[order](rr)
            elif kind == "quad":
                c = data
                out[m] = (c * rr * rr, 2 * c * rr, np.full_like(rr, 2 * c))[order]
            elif kind == "hermite":
                out[m] = _poly(data[1], rr - data[0], order)
            else:
                out[m] = data if order == 0 else 0.0
        return out

    def value(self, r):
        return self._eval(r, 0)

    def d1(self, r):
        return self._eval(r, 1)

    def d2(self, r):
        return self._eval(r, 2)

    __call__ = value

    def radial_breaks(self, r):
        return self.breakpoints


def _clamped_pieces(p, q, coeffs, dom, grid_size=2001):
    """Split [p, q] into Hermite and dominant pieces wherever the blend exceeds the dominant."""
    s = np.linspace(p, q, grid_size)
    over = _poly(coeffs, s - p, 0) > dom[0](s)
    if not np.any(over):
        return [(p, q, "hermite", (p, coeffs))], []
    pieces = []
    switches = []
    start = p
    state = bool(over[0])
    for i in range(1, grid_size):
        if bool(over[i]) != state:
            # bisect the switching point
            a, b = s[i - 1], s[i]
            for _ in range(60):
                m = 0.5 * (a + b)
                if (_poly(coeffs, m - p, 0) > dom[0](np.array(m))) == state:
                    a = m
                else:
                    b = m
            cut = 0.5 * (a + b)
            pieces.append((start, cut, "dominant" if state else "hermite", (p, coeffs)))
            switches.append(cut)
            start = cut
            state = bool(over[i])
    pieces.append((start, q, "dominant" if state else "hermite", (p, coeffs)))
    return pieces, switches


def build_test_function(kind, *, n, beta=None, phi=None, check_points=1000):
    """Build the test function f_n.

    :param kind: "power" (needs ``beta``) or "modulus" (needs ``phi``, a ReferenceFunction)
    :param n: smoothing index; f_n equals the dominant function from r = 1/n on
    :raises TestFunctionError: if the checks on ``check_points`` grid points fail
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    a, b = 1.0 / (n + 1), 1.0 / n
    if kind == "power":
        if beta is None or not 0.0 < beta <= 1.0:
            raise ValueError("power test function needs beta in (0, 1]")
        dom = (lambda r: np.asarray(r) ** beta,
               lambda r: beta * np.asarray(r) ** (beta - 1),
               lambda r: beta * (beta - 1) * np.asarray(r) ** (beta - 2))
        c_quad = 1.0
        top, sat = 4.0, 6.0
        d_top = [float(f(np.array(top))) for f in dom]
        level = d_top[0] + 0.5 * d_top[1] * (sat - top)
        params = {"beta": float(beta)}
    elif kind == "modulus":
        if phi is None:
            raise ValueError("modulus test function needs a reference function")
        dom = (lambda r: phi.F(r), lambda r: phi.phi(r), lambda r: phi.dphi(r))
        c_quad = 0.5 * float(phi.F(np.array(a))) / a ** 2
        top, sat = 2.0, 3.0
        d_top = [float(f(np.array(top))) for f in dom]
        level = d_top[0] + 1.0
        params = {"phi": phi.name, **phi.params}
    else:
        raise ValueError(f"unknown test function kind {kind!r}")

    left = [c_quad * a * a, 2 * c_quad * a, 2 * c_quad]
    right = [float(f(np.array(b))) for f in dom]
    blend_lo, sw_lo = _clamped_pieces(a, b, _hermite(a, b, left, right), dom)
    coeffs_hi = _hermite(top, sat, d_top, [level, 0.0, 0.0])
    if kind == "power":
        blend_hi, sw_hi = _clamped_pieces(top, sat, coeffs_hi, dom)
    else:
        blend_hi, sw_hi = [(top, sat, "hermite", (top, coeffs_hi))], []
    pieces = ([(0.0, a, "quad", c_quad)] + blend_lo + [(b, top, "dominant", None)] + blend_hi
              + [(sat, math.inf, "const", level)])
    breaks = tuple(sorted({a, b, top, sat, *sw_lo, *sw_hi}))
    tf = TestFunction(kind, n, params, pieces, breaks, level, sat, dom, 1.0,
                      phi if kind == "modulus" else None)
    _check(tf, dom, top if kind == "modulus" else math.inf, check_points)
    return tf


def _check(tf, dom, dom_limit, count):
    grid = np.unique(np.concatenate([
        np.geomspace(1e-3 / (tf.n + 1), tf.saturation_radius + 1.0, count),
        np.linspace(1.0 / (tf.n + 1), 1.0 / tf.n, count)]))
    vals = tf.value(grid)
    steps = np.diff(vals)
    bad = np.nonzero(steps < -1e-14 * np.maximum(1.0, np.abs(vals[1:])))[0]
    if bad.size:
        raise TestFunctionError(f"test function not monotone near r={grid[bad[0]]:.6g}",
                                grid[bad[0]])
    m = grid <= dom_limit
    excess = vals[m] - dom[0](grid[m])
    bad = np.nonzero(excess > 1e-13 * np.maximum(1.0, np.abs(vals[m])))[0]
    if bad.size:
        raise TestFunctionError(f"test function exceeds its dominating function at "
                                f"r={grid[m][bad[0]]:.6g}", grid[m][bad[0]])
