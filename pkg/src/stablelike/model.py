"""
Coefficient fields of variable-order stable-like operators.

An operator is described by the dimension ``d``, a stability index field
``alpha(x)`` and a kernel field ``n(x, z)``; the jump intensity at ``x`` is
``n(x, z) / |z|**(d + alpha(x))``.  Every preset carries its structural
bounds as data so that downstream code (quadrature tail bounds, thinning
majorants, drift verdicts) never has to rediscover them.

Presets are encoded as a kind code plus a flat parameter vector understood
by the compiled evaluators in :mod:`stablelike._jit`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import optimize, special

from . import _jit

__all__ = [
    "IndexField",
    "KernelField",
    "OperatorSpec",
    "MatrixField",
    "ReferenceFunction",
    "bass_weight",
    "sphere_area",
    "make_bass_spec",
    "make_constant_spec",
    "make_sde_spec",
    "psi",
    "continuity_modulus_A",
]

MAX_DIM = 3


def sphere_area(d):
    """Surface area of the unit sphere in R^d."""
    return 2.0 * math.pi ** (0.5 * d) / special.gamma(0.5 * d)


def bass_weight(alpha, d):
    """Kernel weight for which the constant-order operator has symbol -|xi|^alpha.

    :param alpha: stability index (scalar or array) in (0, 2)
    :param d: dimension
    :returns: alpha 2^(alpha-1) Gamma((alpha+d)/2) / (pi^(d/2) Gamma(1-alpha/2))
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(a <= 0) or np.any(a >= 2):
        raise ValueError("Bass weight requires 0 < alpha < 2")
    w = (a * np.exp2(a - 1.0) * special.gamma(0.5 * (a + d))
         / (np.pi ** (0.5 * d) * special.gamma(1.0 - 0.5 * a)))
    return float(w) if w.ndim == 0 else w


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != d:
        if d == 1:
            x = x[..., None]
        else:
            raise ValueError(f"expected points with last axis of length {d}, got {x.shape}")
    return x


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _table_params(axes, values):
    axes = [np.asarray(ax, dtype=float) for ax in axes]
    values = np.asarray(values, dtype=float)
    if values.shape != tuple(len(ax) for ax in axes):
        raise ValueError("table values must have shape (len(axis_1), ..., len(axis_D))")
    for ax in axes:
        if len(ax) < 2 or np.any(np.diff(ax) <= 0):
            raise ValueError("table axes must be strictly increasing with at least two nodes")
    head = [float(len(axes))] + [float(len(ax)) for ax in axes]
    return np.concatenate([head] + axes + [values.ravel()])


# ---------------------------------------------------------------------------
# index field
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IndexField:
    """Stability index alpha(x) with declared bounds 0 < alpha_min <= alpha <= alpha_max < 2.

    Use the classmethod constructors; parameters are validated so that the
    declared bounds hold analytically (tables: by their node values).
    """

    kind: str
    code: int
    params: np.ndarray
    d: int
    alpha_min: float
    alpha_max: float
    lipschitz: float = 0.0

    def __post_init__(self):
        if not 1 <= self.d <= MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}")
        if not 0.0 < self.alpha_min <= self.alpha_max < 2.0:
            raise ValueError(
                f"index bounds must satisfy 0 < alpha_min <= alpha_max < 2, "
                f"got [{self.alpha_min}, {self.alpha_max}]")

    @classmethod
    def constant(cls, d, alpha):
        alpha = float(alpha)
        return cls("constant", _jit.ALPHA_CONST, _freeze([alpha]), d, alpha, alpha, 0.0)

    @classmethod
    def bump(cls, d, a, b):
        """alpha(x) = a + b exp(-|x|^2)."""
        lo, hi = min(a, a + b), max(a, a + b)
        lip = abs(b) * math.sqrt(2.0) * math.exp(-0.5)
        return cls("bump", _jit.ALPHA_BUMP, _freeze([a, b]), d, lo, hi, lip)

    @classmethod
    def periodic(cls, d, a, b, u):
        """alpha(x) = a + b sin(<u, x>)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (d,):
            raise ValueError("frequency vector must have length d")
        lo, hi = a - abs(b), a + abs(b)
        return cls("periodic", _jit.ALPHA_PERIODIC, _freeze(np.r_[a, b, u]), d, lo, hi,
                   abs(b) * float(np.linalg.norm(u)))

    @classmethod
    def tabulated(cls, axes, values, alpha_min=None, alpha_max=None):
        """Multilinear interpolation of node values on a tensor grid (clamped outside)."""
        values = np.asarray(values, dtype=float)
        lo = float(values.min()) if alpha_min is None else float(alpha_min)
        hi = float(values.max()) if alpha_max is None else float(alpha_max)
        if values.min() < lo or values.max() > hi:
            raise ValueError("tabulated index values violate the declared bounds")
        p = _table_params(axes, values)
        return cls("tabulated", _jit.ALPHA_TABLE, _freeze(p), len(axes), lo, hi, math.inf)

    def __call__(self, x):
        x = _as_points(x, self.d)
        flat = np.ascontiguousarray(x.reshape(-1, self.d))
        return _jit.alpha_batch(self.code, self.params, flat).reshape(x.shape[:-1])

    @property
    def is_constant(self):
        return self.code == _jit.ALPHA_CONST


# ---------------------------------------------------------------------------
# kernel field
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelField:
    """Kernel n(x, z) with declared bounds 0 < c_lower <= n <= c_upper.

    ``symmetric`` records whether n(x, z) = n(x, -z) holds analytically,
    ``x_dependent`` / ``z_dependent`` whether the kernel varies in each
    argument.  The Bass kernel reads alpha(x) from ``index``.
    """

    kind: str
    code: int
    params: np.ndarray
    d: int
    c_lower: float
    c_upper: float
    symmetric: bool
    x_dependent: bool = True
    z_dependent: bool = True
    index: Optional[IndexField] = None

    def __post_init__(self):
        if not 0.0 < self.c_lower <= self.c_upper < math.inf:
            raise ValueError(
                f"kernel bounds must satisfy 0 < c_lower <= c_upper, got "
                f"[{self.c_lower}, {self.c_upper}]")

    @classmethod
    def constant(cls, d, c):
        c = float(c)
        return cls("constant", _jit.KERNEL_CONST, _freeze([c]), d, c, c, True, False, False)

    @classmethod
    def bass(cls, index):
        lo, hi = _bass_bounds(index.alpha_min, index.alpha_max, index.d)
        return cls("bass", _jit.KERNEL_BASS, _freeze([float(index.d)]), index.d, lo, hi,
                   True, not index.is_constant, False, index)

    @classmethod
    def skew(cls, d, c0, s, u, w):
        """n(x, z) = c0 (1 + s sin<u,x> tanh<w,z>), not symmetric in z."""
        if not (c0 > 0 and 0 <= s < 1):
            raise ValueError("skew kernel needs c0 > 0 and 0 <= s < 1")
        u = np.atleast_1d(np.asarray(u, dtype=float))
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return cls("skew", _jit.KERNEL_SKEW, _freeze(np.r_[c0, s, u, w]), d,
                   c0 * (1 - s), c0 * (1 + s), s == 0.0)

    @classmethod
    def cosmod(cls, d, c0, s, u, w):
        """n(x, z) = c0 (1 + s sin<u,x> cos<w,z>), symmetric in z."""
        if not (c0 > 0 and 0 <= s < 1):
            raise ValueError("modulated kernel needs c0 > 0 and 0 <= s < 1")
        u = np.atleast_1d(np.asarray(u, dtype=float))
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return cls("cosmod", _jit.KERNEL_COSMOD, _freeze(np.r_[c0, s, u, w]), d,
                   c0 * (1 - s), c0 * (1 + s), True)

    @classmethod
    def tabulated(cls, x_axes, z_axes, values, c_lower=None, c_upper=None, symmetric=False):
        """Multilinear table over (x, z) in R^{2d}; values indexed [x_1..x_d, z_1..z_d]."""
        values = np.asarray(values, dtype=float)
        d = len(x_axes)
        if len(z_axes) != d:
            raise ValueError("x and z axes must have the same dimension")
        lo = float(values.min()) if c_lower is None else float(c_lower)
        hi = float(values.max()) if c_upper is None else float(c_upper)
        if values.min() < lo or values.max() > hi:
            raise ValueError("tabulated kernel values violate the declared bounds")
        p = _table_params(list(x_axes) + list(z_axes), values)
        return cls("tabulated", _jit.KERNEL_TABLE, _freeze(p), d, lo, hi, bool(symmetric))

    def _index_codes(self):
        if self.index is None:
            return _jit.ALPHA_CONST, _freeze([1.0])
        return self.index.code, self.index.params

    def __call__(self, x, z):
        x = _as_points(x, self.d)
        z = _as_points(z, self.d)
        shape = np.broadcast_shapes(x.shape, z.shape)[:-1]
        X = np.ascontiguousarray(np.broadcast_to(x, shape + (self.d,)).reshape(-1, self.d))
        Z = np.ascontiguousarray(np.broadcast_to(z, shape + (self.d,)).reshape(-1, self.d))
        ak, ap = self._index_codes()
        return _jit.kernel_batch(self.code, self.params, ak, ap, X, Z).reshape(shape)


def _bass_bounds(a0, a2, d):
    if a0 <= 0 or a2 >= 2:
        raise ValueError("Bass kernel requires 0 < alpha_min and alpha_max < 2")
    if a0 == a2:
        w = bass_weight(a0, d)
        return w, w
    grid = np.linspace(a0, a2, 2001)
    vals = bass_weight(grid, d)
    lo, hi = vals.min(), vals.max()
    for sign in (1.0, -1.0):
        k = int(np.argmin(sign * vals))
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        if b > a:
            res = optimize.minimize_scalar(lambda s: sign * bass_weight(s, d), bounds=(a, b),
                                           method="bounded", options={"xatol": 1e-13})
            if sign > 0:
                lo = min(lo, res.fun)
            else:
                hi = max(hi, -res.fun)
    return lo * (1 - 1e-12), hi * (1 + 1e-12)


# ---------------------------------------------------------------------------
# operator specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """The operator L f(x) = int (f(x+z) - f(x) - <grad f(x), z> 1{|z|<=1}) n(x,z)/|z|^{d+alpha(x)} dz."""

    d: int
    index: IndexField
    kernel: KernelField
    label: str = ""

    def __post_init__(self):
        if self.index.d != self.d or self.kernel.d != self.d:
            raise ValueError("dimension mismatch between spec, index field and kernel field")

    @property
    def alpha_min(self):
        return self.index.alpha_min

    @property
    def alpha_max(self):
        return self.index.alpha_max

    @property
    def c_lower(self):
        return self.kernel.c_lower

    @property
    def c_upper(self):
        return self.kernel.c_upper

    @property
    def symmetric(self):
        return self.kernel.symmetric

    @property
    def omega(self):
        return sphere_area(self.d)

    def alpha(self, x):
        return self.index(x)

    def n(self, x, z):
        return self.kernel(x, z)

    def density(self, x, z):
        """Jump intensity n(x,z)/|z|^{d+alpha(x)}."""
        x = _as_points(x, self.d)
        z = _as_points(z, self.d)
        a = self.index(x)
        rho = np.linalg.norm(z, axis=-1)
        return self.kernel(x, z) * np.exp(-(self.d + a) * np.log(rho))

    def packed(self):
        """(index code, index params, kernel code, kernel params) for compiled code."""
        return self.index.code, self.index.params, self.kernel.code, self.kernel.params


def make_bass_spec(d, index):
    """Bass-type operator: n(x, z) = w(alpha(x)), constant in z.

    With constant index the generator acts on plane waves as
    L e_xi = -|xi|^alpha e_xi.  (Well-posedness for variable index also needs
    a Dini condition on the modulus of alpha; it is not checked here.)
    """
    if index.d != d:
        raise ValueError("index field dimension differs from d")
    return OperatorSpec(d, index, KernelField.bass(index), label="bass")


def make_constant_spec(d, alpha, c):
    return OperatorSpec(d, IndexField.constant(d, alpha), KernelField.constant(d, c),
                        label="constant")


# ---------------------------------------------------------------------------
# matrix fields and the SDE kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MatrixField:
    """Matrix coefficient A(x) with lambda_lo Id <= A(x) <= lambda_hi Id.

    ``modulus`` is a Lipschitz constant of x -> A(x) in operator norm
    (0 for constant fields).
    """

    kind: str
    d: int
    matrix: Optional[np.ndarray] = None
    m: Optional[np.ndarray] = None
    s: Optional[np.ndarray] = None
    U: Optional[np.ndarray] = None
    lambda_lo: float = field(init=False)
    lambda_hi: float = field(init=False)
    modulus: float = field(init=False)

    def __post_init__(self):
        if self.kind == "constant":
            A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            if A.shape != (self.d, self.d):
                raise ValueError("matrix must be d x d")
            if not np.allclose(A, A.T, rtol=0, atol=1e-14 * np.abs(A).max()):
                raise ValueError("constant matrix field must be symmetric")
            ev = np.linalg.eigvalsh(A)
            if ev.min() <= 0:
                raise ValueError("matrix field is singular or not positive definite")
            object.__setattr__(self, "matrix", _freeze(A))
            object.__setattr__(self, "lambda_lo", float(ev.min()))
            object.__setattr__(self, "lambda_hi", float(ev.max()))
            object.__setattr__(self, "modulus", 0.0)
        elif self.kind == "diagonal":
            m = np.atleast_1d(np.asarray(self.m, dtype=float))
            s = np.atleast_1d(np.asarray(self.s, dtype=float))
            U = np.atleast_2d(np.asarray(self.U, dtype=float)).reshape(self.d, self.d)
            lo = m - np.abs(s)
            if lo.min() <= 0:
                raise ValueError("diagonal matrix field must satisfy m_i - |s_i| > 0")
            object.__setattr__(self, "m", _freeze(m))
            object.__setattr__(self, "s", _freeze(s))
            object.__setattr__(self, "U", _freeze(U))
            object.__setattr__(self, "lambda_lo", float(lo.min()))
            object.__setattr__(self, "lambda_hi", float((m + np.abs(s)).max()))
            object.__setattr__(self, "modulus",
                               float(np.max(np.abs(s) * np.linalg.norm(U, axis=1))))
        else:
            raise ValueError(f"unknown matrix field kind {self.kind!r}")

    @classmethod
    def constant(cls, A):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls("constant", A.shape[0], matrix=A)

    @classmethod
    def diagonal(cls, m, s, U):
        """A(x) = diag(m_i + s_i sin<U_i, x>)."""
        m = np.atleast_1d(np.asarray(m, dtype=float))
        return cls("diagonal", m.shape[0], m=m, s=s, U=U)

    def __call__(self, x):
        x = _as_points(x, self.d)
        if self.kind == "constant":
            return np.broadcast_to(self.matrix, x.shape[:-1] + (self.d, self.d)).copy()
        diag = self.m + self.s * np.sin(x @ self.U.T)
        out = np.zeros(x.shape[:-1] + (self.d, self.d))
        idx = np.arange(self.d)
        out[..., idx, idx] = diag
        return out


def make_sde_spec(d, alpha, A, probes=256, seed=0):
    """Kernel of the jump SDE dX = A(X-) dZ driven by a rotationally symmetric alpha-stable Z.

    k(x, z) = c/|det A(x)| (|z|/|A(x)^{-1} z|)^{d+alpha} with c the Bass
    normalisation at constant alpha, so A = Id reproduces the Bass kernel.
    """
    if A.d != d:
        raise ValueError("matrix field dimension differs from d")
    c = bass_weight(alpha, d)
    pts = np.random.default_rng(seed).uniform(-10.0, 10.0, size=(probes, d))
    pts[0] = 0.0
    mats = A(pts)
    dets = np.linalg.det(mats)
    if np.any(np.abs(dets) <= 1e-12 * A.lambda_hi ** d):
        raise ValueError("matrix field is singular at a probe point")
    ev = np.linalg.eigvalsh(mats)
    if ev.min() < A.lambda_lo * (1 - 1e-12) or ev.max() > A.lambda_hi * (1 + 1e-12):
        raise ValueError("matrix field violates its declared ellipticity bounds")
    index = IndexField.constant(d, alpha)
    if A.kind == "constant":
        M = A.matrix
        sv = np.linalg.svd(M, compute_uv=False)
        det = abs(float(np.linalg.det(M)))
        lo = c * sv.min() ** (d + alpha) / det
        hi = c * sv.max() ** (d + alpha) / det
        p = np.r_[c, alpha, det, np.linalg.inv(M).ravel()]
        kern = KernelField("sde", _jit.KERNEL_SDE, _freeze(p), d, lo * (1 - 1e-12),
                           hi * (1 + 1e-12), True, False, d > 1)
    else:
        l1, l2 = A.lambda_lo, A.lambda_hi
        lo = c * l1 ** (d + alpha) / l2 ** d
        hi = c * l2 ** (d + alpha) / l1 ** d
        p = np.r_[c, alpha, A.m, A.s, A.U.ravel()]
        kern = KernelField("sde_diag", _jit.KERNEL_SDE_DIAG, _freeze(p), d, lo * (1 - 1e-12),
                           hi * (1 + 1e-12), True, True, d > 1)
    return OperatorSpec(d, index, kern, label="sde")


# ---------------------------------------------------------------------------
# reference functions
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _laguerre(n):
    return np.polynomial.laguerre.laggauss(n)


@dataclass(frozen=True, eq=False)
class ReferenceFunction:
    """Reference function phi on (0, 2] with derivatives and the primitive F(r) = int_0^r phi.

    :param phi, dphi, d2phi: vectorised callables
    :param primitive: vectorised F, or None for Gauss-Laguerre quadrature in the
        log radius, F(r) = r int_0^inf phi(r e^{-u}) e^{-u} du
    """

    name: str
    phi: Callable
    dphi: Callable
    d2phi: Callable
    primitive: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def F(self, r):
        r = np.asarray(r, dtype=float)
        if self.primitive is not None:
            return self.primitive(r)
        u, w = _laguerre(64)
        vals = self.phi(r[..., None] * np.exp(-u))
        return r * (vals @ w)

    def in_class_D(self, grid=None):
        """phi > 0, phi' < 0, phi'' > 0 on a grid in (0, 2]."""
        if grid is None:
            grid = np.geomspace(1e-8, 2.0, 400)
        return bool(np.all(self.phi(grid) > 0) and np.all(self.dphi(grid) < 0)
                    and np.all(self.d2phi(grid) > 0))

    @classmethod
    def loglog(cls):
        """phi(r) = 1 - 1/log(log(54/r)); the Lipschitz-rate preset."""
        def parts(r):
            L = np.log(54.0 / np.asarray(r, dtype=float))
            return L, np.log(L)

        def phi(r):
            L, LL = parts(r)
            return 1.0 - 1.0 / LL

        def dphi(r):
            L, LL = parts(r)
            return -1.0 / (np.asarray(r) * L * LL ** 2)

        def d2phi(r):
            r = np.asarray(r, dtype=float)
            L, LL = parts(r)
            return (LL * (L - 1.0) - 2.0) / (r ** 2 * L ** 2 * LL ** 3)

        return cls("loglog", phi, dphi, d2phi, None, {})

    @classmethod
    def logpower(cls, beta=1.0):
        """phi(r) = log(6/r)^beta; the log-Lipschitz preset."""
        beta = float(beta)
        if beta <= 0:
            raise ValueError("exponent must be positive")

        def phi(r):
            return np.log(6.0 / np.asarray(r, dtype=float)) ** beta

        def dphi(r):
            r = np.asarray(r, dtype=float)
            L = np.log(6.0 / r)
            return -beta * L ** (beta - 1.0) / r

        def d2phi(r):
            r = np.asarray(r, dtype=float)
            L = np.log(6.0 / r)
            return beta * L ** (beta - 2.0) * (beta - 1.0 + L) / r ** 2

        def primitive(r):
            r = np.asarray(r, dtype=float)
            with np.errstate(divide="ignore"):
                L = np.log(6.0 / r)
            out = 6.0 * special.gamma(beta + 1.0) * special.gammaincc(beta + 1.0, L)
            return np.where(r > 0, out, 0.0)

        return cls("logpower", phi, dphi, d2phi, primitive, {"beta": beta})

    @classmethod
    def affine(cls, c=2.0, slope=1.0):
        """phi(r) = c - slope r; lies on the boundary of the class (phi'' = 0)."""
        return cls("affine",
                   lambda r: c - slope * np.asarray(r, dtype=float),
                   lambda r: np.full_like(np.asarray(r, dtype=float), -slope),
                   lambda r: np.zeros_like(np.asarray(r, dtype=float)),
                   lambda r: c * np.asarray(r, dtype=float) - 0.5 * slope * np.asarray(r) ** 2,
                   {"c": c, "slope": slope})

    @classmethod
    def constant(cls, c=1.0):
        """phi = c; the Lipschitz limit (not in the class, normaliser c r)."""
        return cls("constant",
                   lambda r: np.full_like(np.asarray(r, dtype=float), c),
                   lambda r: np.zeros_like(np.asarray(r, dtype=float)),
                   lambda r: np.zeros_like(np.asarray(r, dtype=float)),
                   lambda r: c * np.asarray(r, dtype=float),
                   {"c": c})


def psi(phi, r):
    """Psi(r) = -phi'(2r) r / phi(r) for r in (0, 1]."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0) or np.any(r_arr > 1):
        raise ValueError("psi is defined for r in (0, 1]")
    out = -phi.dphi(2.0 * r_arr) * r_arr / phi.phi(r_arr)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# continuity modulus of the coefficients
# ---------------------------------------------------------------------------

def _ball_probes(d, radius, count, rng):
    if d == 1:
        return np.linspace(-radius, radius, count)[:, None]
    g = rng.normal(size=(count, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = radius * rng.uniform(size=(count, 1)) ** (1.0 / d)
    return g * rad


def continuity_modulus_A(spec, x, y, variant="thm15", probes=1000, seed=0, z_radius=3.0):
    """Continuity modulus A(x, y) of the coefficients at a pair with 0 < |x-y| <= 1.

    ``thm15``: |da| log(1/r) + sup_{|z|<=1}|n(x,z)-n(y,z)| + sup_{w,|z1-z2|<=r}|n(w,z1)-n(w,z2)|.
    ``prop31``: the first term is multiplied by r^{-|da|}.

    The suprema are lower estimates over a probe set: ``probes`` points in the
    unit ball (a uniform grid in d = 1) plus +-(x-y) and +-(x-y)/r, and, for
    the second supremum, base points w in {x, y, (x+y)/2} with z1 in the ball
    of radius ``z_radius`` and z2 = z1 + r u for random unit u.
    """
    d = spec.d
    x = _as_points(x, d).reshape(d)
    y = _as_points(y, d).reshape(d)
    diff = x - y
    r = float(np.linalg.norm(diff))
    if r == 0:
        raise ValueError("continuity modulus needs x != y")
    if r > 1:
        raise ValueError("continuity modulus is defined for |x-y| <= 1")
    if variant not in ("thm15", "prop31"):
        raise ValueError("variant must be 'thm15' or 'prop31'")
    ax, ay = float(spec.alpha(x)), float(spec.alpha(y))
    da = abs(ax - ay)
    first = da * math.log(1.0 / r)
    if variant == "prop31":
        first *= r ** (-da)
    kern = spec.kernel
    if not kern.x_dependent and not kern.z_dependent:
        return first
    rng = np.random.default_rng(seed)
    zs = np.vstack([_ball_probes(d, 1.0, probes, rng), diff, -diff, diff / r, -diff / r])
    sup1 = 0.0
    if kern.x_dependent:
        sup1 = float(np.max(np.abs(kern(x, zs) - kern(y, zs))))
    sup2 = 0.0
    if kern.z_dependent:
        bases = np.vstack([x, y, 0.5 * (x + y)])
        z1 = _ball_probes(d, z_radius, probes, rng)
        if d == 1:
            u = np.where(rng.uniform(size=(probes, 1)) < 0.5, -1.0, 1.0)
        else:
            u = rng.normal(size=(probes, d))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
        z2 = z1 + r * u
        for w in bases:
            sup2 = max(sup2, float(np.max(np.abs(kern(w, z1) - kern(w, z2)))))
    return first + sup1 + sup2
