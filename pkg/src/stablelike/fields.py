"""
Scalar test fields used by the quadrature engine and the Monte Carlo estimators.

A field exposes vectorised values, its gradient and Hessian at a point, and
the structural information the quadrature needs to lay out its grid: a
length scale, an optional wavenumber for oscillatory fields, and (for
compactly supported fields) the radius beyond which a displaced value is the
constant ``far_value``.

Bivariate fields F(x, y) follow the same pattern with gradients taken jointly
in (x, y) in R^{2d}.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Field",
    "Cosine",
    "Affine",
    "Constant",
    "CompactBump",
    "GaussBump",
    "ClippedSin",
    "MollifiedIndicator",
    "BiField",
    "SumField",
    "RadialPairField",
    "BOUNDED_FUNCTIONS",
    "bounded_function",
]


def _points(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    return x


class Field:
    """Base class for univariate test fields on R^d."""

    d = 1
    sup_norm = math.inf
    scale = 1.0
    wavenumber = None
    far_value = None
    affine = False
    axis = None

    def value(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)

    def grad(self, x):
        raise NotImplementedError

    def hess(self, x):
        """Central differences of the gradient, symmetrised."""
        x = np.asarray(x, dtype=float).reshape(self.d)
        h = 1e-4 * min(self.scale, 1.0)
        H = np.empty((self.d, self.d))
        for i in range(self.d):
            e = np.zeros(self.d)
            e[i] = h
            H[i] = (self.grad(x + e) - self.grad(x - e)) / (2 * h)
        return 0.5 * (H + H.T)

    def structure_radius(self, x):
        """Radius R with f(x + z) = far_value for |z| >= R; None if there is none."""
        return None

    def radial_breaks(self, x):
        """Jump radii |z| seen from x at which f(x + z) loses smoothness or changes shape."""
        return ()


class Cosine(Field):
    """cos(<xi, x> + phase)."""

    def __init__(self, xi, phase=0.0):
        self.xi = np.atleast_1d(np.asarray(xi, dtype=float))
        self.d = self.xi.shape[0]
        self.phase = float(phase)
        self.sup_norm = 1.0
        k = float(np.linalg.norm(self.xi))
        self.wavenumber = k if k > 0 else None
        self.scale = 2 * math.pi / k if k > 0 else 1.0
        self.axis = self.xi / k if k > 0 else None

    def value(self, x):
        return np.cos(_points(x, self.d) @ self.xi + self.phase)

    def grad(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        return -math.sin(float(x @ self.xi) + self.phase) * self.xi

    def hess(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        return -math.cos(float(x @ self.xi) + self.phase) * np.outer(self.xi, self.xi)


class Affine(Field):
    """<a, x> + b."""

    affine = True

    def __init__(self, a, b=0.0):
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        self.d = self.a.shape[0]
        self.b = float(b)
        self.scale = math.inf

    def value(self, x):
        return _points(x, self.d) @ self.a + self.b

    def grad(self, x):
        return self.a.copy()

    def hess(self, x):
        return np.zeros((self.d, self.d))


class Constant(Field):
    affine = True

    def __init__(self, d, c):
        self.d = d
        self.c = float(c)
        self.sup_norm = abs(self.c)
        self.scale = math.inf
        self.far_value = self.c

    def value(self, x):
        x = _points(x, self.d)
        return np.full(x.shape[:-1], self.c)

    def grad(self, x):
        return np.zeros(self.d)

    def hess(self, x):
        return np.zeros((self.d, self.d))

    def structure_radius(self, x):
        return 0.0


class CompactBump(Field):
    """height * exp(1 - 1/(1 - s^2)) with s = |x - center|/radius, zero for s >= 1."""

    def __init__(self, center, radius=1.0, height=1.0):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.d = self.center.shape[0]
        self.radius = float(radius)
        self.height = float(height)
        self.sup_norm = abs(self.height)
        self.scale = 0.25 * self.radius
        self.far_value = 0.0

    def _s2(self, x):
        u = (_points(x, self.d) - self.center) / self.radius
        return np.sum(u * u, axis=-1)

    def value(self, x):
        s2 = self._s2(x)
        inside = s2 < 1.0
        t = np.where(inside, 1.0 - s2, 1.0)
        return np.where(inside, self.height * np.exp(1.0 - 1.0 / t), 0.0)

    def grad(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        u = (x - self.center) / self.radius
        s2 = float(u @ u)
        if s2 >= 1.0:
            return np.zeros(self.d)
        t = 1.0 - s2
        # d/dx exp(1 - 1/t) = exp(.) * (-1/t^2) * 2u/R
        return self.height * math.exp(1.0 - 1.0 / t) * (-2.0 / t ** 2) * u / self.radius

    def hess(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        u = (x - self.center) / self.radius
        s2 = float(u @ u)
        if s2 >= 1.0:
            return np.zeros((self.d, self.d))
        t = 1.0 - s2
        g = self.height * math.exp(1.0 - 1.0 / t)
        a = -2.0 / t ** 2
        # gradient in u is g a u; the u-derivative of a contributes -8/t^3 u u^T
        uu = np.outer(u, u)
        H = g * ((a * a - 8.0 / t ** 3) * uu + a * np.eye(self.d))
        return H / self.radius ** 2

    def structure_radius(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        return float(np.linalg.norm(x - self.center)) + self.radius

    def radial_breaks(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        dist = float(np.linalg.norm(x - self.center))
        return tuple(b for b in (dist, abs(dist - self.radius), dist + self.radius) if b > 0)


class GaussBump(Field):
    """height * exp(-|x - center|^2 / (2 width^2))."""

    def __init__(self, center, width=1.0, height=1.0):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.d = self.center.shape[0]
        self.width = float(width)
        self.height = float(height)
        self.sup_norm = abs(self.height)
        self.scale = self.width
        self.far_value = 0.0

    def value(self, x):
        u = (_points(x, self.d) - self.center) / self.width
        return self.height * np.exp(-0.5 * np.sum(u * u, axis=-1))

    def grad(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        u = (x - self.center) / self.width
        return -self.height * math.exp(-0.5 * float(u @ u)) * u / self.width

    def hess(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        u = (x - self.center) / self.width
        g = self.height * math.exp(-0.5 * float(u @ u))
        return g * (np.outer(u, u) - np.eye(self.d)) / self.width ** 2

    def structure_radius(self, x):
        # beyond 40 widths the value is below 1e-300 relative
        x = np.asarray(x, dtype=float).reshape(self.d)
        return float(np.linalg.norm(x - self.center)) + 40.0 * self.width


class ClippedSin(Field):
    """clip(amplitude * sin(x_1), -1, 1); bounded by 1, Lipschitz but not C^2."""

    def __init__(self, d=1, amplitude=1.5):
        self.d = d
        self.amplitude = float(amplitude)
        self.sup_norm = 1.0

    def value(self, x):
        return np.clip(self.amplitude * np.sin(_points(x, self.d)[..., 0]), -1.0, 1.0)

    def grad(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        g = np.zeros(self.d)
        s = self.amplitude * math.sin(x[0])
        if abs(s) < 1.0:
            g[0] = self.amplitude * math.cos(x[0])
        return g


class MollifiedIndicator(Field):
    """C^2 smoothed indicator of the ball |x - center| <= radius (quintic smoothstep of given width)."""

    def __init__(self, d=1, center=None, radius=1.0, width=0.2):
        self.d = d
        self.center = np.zeros(d) if center is None else np.atleast_1d(np.asarray(center, float))
        self.radius = float(radius)
        self.width = float(width)
        self.sup_norm = 1.0
        self.scale = self.width
        self.far_value = 0.0

    def _t(self, x):
        s = np.linalg.norm(_points(x, self.d) - self.center, axis=-1)
        return np.clip((self.radius + 0.5 * self.width - s) / self.width, 0.0, 1.0), s

    def value(self, x):
        t, _ = self._t(x)
        return t ** 3 * (10.0 - 15.0 * t + 6.0 * t * t)

    def grad(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        t, s = self._t(x)
        t, s = float(t), float(s)
        if t <= 0.0 or t >= 1.0 or s == 0.0:
            return np.zeros(self.d)
        dval = 30.0 * t * t * (1.0 - t) ** 2
        return dval * (-1.0 / self.width) * (x - self.center) / s

    def structure_radius(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        return float(np.linalg.norm(x - self.center)) + self.radius + self.width

    def radial_breaks(self, x):
        x = np.asarray(x, dtype=float).reshape(self.d)
        dist = float(np.linalg.norm(x - self.center))
        out = [dist]
        for s in (self.radius - 0.5 * self.width, self.radius + 0.5 * self.width):
            out += [abs(dist - s), dist + s]
        return tuple(b for b in out if b > 0)


BOUNDED_FUNCTIONS = {
    "clipped-sin": lambda d: ClippedSin(d),
    "gauss-bump": lambda d: GaussBump(np.zeros(d), 1.0, 1.0),
    "indicator-mollified": lambda d: MollifiedIndicator(d),
}


def bounded_function(name, d):
    """Instantiate a registered bounded test function (sup norm known exactly)."""
    try:
        return BOUNDED_FUNCTIONS[name](d)
    except KeyError:
        raise ValueError(f"unknown bounded function {name!r}; choose from "
                         f"{sorted(BOUNDED_FUNCTIONS)}") from None


# ---------------------------------------------------------------------------
# bivariate fields
# ---------------------------------------------------------------------------

class BiField:
    """Base class for bivariate fields F(x, y) on R^d x R^d."""

    d = 1
    sup_norm = math.inf
    scale = 1.0

    def value(self, X, Y):
        raise NotImplementedError

    def grad(self, x, y):
        """Joint gradient (grad_x, grad_y) as a vector of length 2d."""
        raise NotImplementedError

    def hess(self, x, y):
        x = np.asarray(x, dtype=float).reshape(self.d)
        y = np.asarray(y, dtype=float).reshape(self.d)
        d = self.d
        h = 1e-4 * min(self.scale, 1.0)
        H = np.empty((2 * d, 2 * d))
        for i in range(2 * d):
            e = np.zeros(2 * d)
            e[i] = h
            H[i] = (self.grad(x + e[:d], y + e[d:]) - self.grad(x - e[:d], y - e[d:])) / (2 * h)
        return 0.5 * (H + H.T)

    def structure_radius(self, x, y):
        return None

    def radial_breaks(self, x, y):
        return ()


class SumField(BiField):
    """g(x) + h(y)."""

    def __init__(self, g, h):
        if g.d != h.d:
            raise ValueError("summands must share the dimension")
        self.g, self.h = g, h
        self.d = g.d
        self.sup_norm = g.sup_norm + h.sup_norm
        self.scale = min(g.scale, h.scale)

    def value(self, X, Y):
        return self.g.value(X) + self.h.value(Y)

    def grad(self, x, y):
        return np.concatenate([self.g.grad(x), self.h.grad(y)])

    def hess(self, x, y):
        d = self.d
        H = np.zeros((2 * d, 2 * d))
        H[:d, :d] = self.g.hess(x)
        H[d:, d:] = self.h.hess(y)
        return H

    def structure_radius(self, x, y):
        a = self.g.structure_radius(x)
        b = self.h.structure_radius(y)
        if a is None or b is None:
            return None
        return max(a, b)

    def radial_breaks(self, x, y):
        return tuple(self.g.radial_breaks(x)) + tuple(self.h.radial_breaks(y))


class RadialPairField(BiField):
    """F(x, y) = f(|x - y|) for a radial profile exposing value, first and second derivatives."""

    def __init__(self, profile, d):
        self.profile = profile
        self.d = d
        self.sup_norm = float(profile.sup_norm)
        self.scale = float(profile.scale)

    def value(self, X, Y):
        X = _points(X, self.d)
        Y = _points(Y, self.d)
        return self.profile.value(np.linalg.norm(X - Y, axis=-1))

    def grad(self, x, y):
        x = np.asarray(x, dtype=float).reshape(self.d)
        y = np.asarray(y, dtype=float).reshape(self.d)
        u = x - y
        s = float(np.linalg.norm(u))
        if s == 0.0:
            return np.zeros(2 * self.d)
        gx = float(self.profile.d1(s)) * u / s
        return np.concatenate([gx, -gx])

    def hess(self, x, y):
        x = np.asarray(x, dtype=float).reshape(self.d)
        y = np.asarray(y, dtype=float).reshape(self.d)
        u = x - y
        s = float(np.linalg.norm(u))
        d = self.d
        e = u / s
        P = np.outer(e, e)
        Hxx = float(self.profile.d2(s)) * P + float(self.profile.d1(s)) / s * (np.eye(d) - P)
        return np.block([[Hxx, -Hxx], [-Hxx, Hxx]])

    def structure_radius(self, x, y):
        s = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
        return s + self.profile.saturation_radius

    def radial_breaks(self, x, y):
        # the pair distance after a jump equals a profile breakpoint b on the
        # spheres |z| = |r - b|, r + b (one marginal moves) and half those
        # (reflected jumps move the distance by 2<v, z>)
        r = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
        out = []
        for b in self.profile.breakpoints:
            for rho in (abs(r - b), r + b):
                out += [rho, 0.5 * rho]
        return tuple(v for v in out if v > 0)
