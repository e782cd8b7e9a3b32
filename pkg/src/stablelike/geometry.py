"""
Reflection map and the seven-component coupling kernel.

For a pair (x, y) with r = |x - y| > 0, small jumps (|z| <= r/2) of one
marginal are mirrored across the hyperplane orthogonal to x - y, large jumps
(|z| > r/2) are shared.  Whatever part of each marginal kernel cannot be
matched this way is left as an independent residual jump, so that each
marginal keeps its own law.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from . import _jit
from .model import _as_points

__all__ = [
    "ComponentTag",
    "CoupledKernel",
    "reflect",
    "tilde_n",
    "marginal_identity_residual",
]


class ComponentTag(IntEnum):
    """Components of the coupling measure; values are the event-log tag bytes."""

    REFLECT_XY = 0   # (z, phi(z)), weight 1/2
    REFLECT_YX = 1   # (phi(z), z), weight 1/2
    SMALL_RESIDUAL_X = 2   # (z, 0)
    SMALL_RESIDUAL_Y = 3   # (0, z)
    SYNC = 4   # (z, z)
    LARGE_RESIDUAL_X = 5   # (z, 0)
    LARGE_RESIDUAL_Y = 6   # (0, z)

    @property
    def small(self):
        return self <= ComponentTag.SMALL_RESIDUAL_Y


SMALL_TAGS = tuple(t for t in ComponentTag if t.small)
LARGE_TAGS = tuple(t for t in ComponentTag if not t.small)


def reflect(x, y, z):
    """Mirror z across the hyperplane orthogonal to x - y (returns -z when x = y).

    Broadcasts over leading axes; the last axis is the spatial one.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    v = x - y
    vv = np.sum(v * v, axis=-1, keepdims=True)
    vz = np.sum(v * z, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = z - (2.0 * vz / vv) * v
    return np.where(vv == 0.0, -z, out)


def tilde_n(spec, x, y, z):
    """n(x,z) ^ n(y,z) ^ n(x,phi(z)) ^ n(y,phi(z)); invariant under z -> phi(z)."""
    x = _as_points(x, spec.d)
    y = _as_points(y, spec.d)
    z = _as_points(z, spec.d)
    p = reflect(x, y, z)
    return np.minimum(np.minimum(spec.n(x, z), spec.n(y, z)),
                      np.minimum(spec.n(x, p), spec.n(y, p)))


class CoupledKernel:
    """Coupling measure mu(x, y, .) at a fixed pair x != y.

    Component densities are with respect to Lebesgue measure in the jump
    variable z; the displacement of the pair for each tag is given by
    :meth:`displacement`.
    """

    def __init__(self, spec, x, y):
        self.spec = spec
        d = spec.d
        self.x = _as_points(x, d).reshape(d).copy()
        self.y = _as_points(y, d).reshape(d).copy()
        diff = self.x - self.y
        self.r = float(np.linalg.norm(diff))
        if self.r == 0.0:
            raise ValueError("coupled kernel is undefined for x = y; the pair moves synchronously")
        self.v = diff / self.r
        self.alpha_x = float(spec.alpha(self.x))
        self.alpha_y = float(spec.alpha(self.y))
        self._ak, self._ap, self._kk, self._kp = spec.packed()
        self.x.setflags(write=False)
        self.y.setflags(write=False)

    def _n(self, point, Z):
        return _jit.kernel_batch(self._kk, self._kp, self._ak, self._ap,
                                 point.reshape(1, -1), np.ascontiguousarray(Z))

    def reflect(self, z):
        z = np.asarray(z, dtype=float)
        return z - 2.0 * (z @ self.v)[..., None] * self.v

    def pieces(self, z):
        """Raw ingredients at jump points z (shape (M, d)).

        Returns a dict with rho, phi(z), n(x,z), n(y,z), tilde n, the two power
        factors |z|^{-d-alpha} and their minimum (the wedge-power density).
        """
        d = self.spec.d
        Z = np.ascontiguousarray(_as_points(z, d).reshape(-1, d))
        P = self.reflect(Z)
        rho = np.linalg.norm(Z, axis=1)
        nx = self._n(self.x, Z)
        ny = self._n(self.y, Z)
        nt = np.minimum(np.minimum(nx, ny), np.minimum(self._n(self.x, P), self._n(self.y, P)))
        logr = np.log(rho)
        px = np.exp(-(d + self.alpha_x) * logr)
        py = np.exp(-(d + self.alpha_y) * logr)
        return {"z": Z, "phi": P, "rho": rho, "nx": nx, "ny": ny, "nt": nt,
                "px": px, "py": py, "q": np.minimum(px, py)}

    def densities(self, z, region_rho=None):
        """All seven component densities at z, shape (..., 7) and ordered by tag.

        ``region_rho`` overrides the radius used to decide between the small
        (|z| <= r/2) and large regimes; the reflection preserves norms only up
        to rounding, so the mirrored point must inherit the original regime.
        """
        z = _as_points(z, self.spec.d)
        shape = z.shape[:-1]
        pc = self.pieces(z)
        rho = pc["rho"] if region_rho is None else np.asarray(region_rho).reshape(-1)
        return _densities_from_pieces(pc, self.r, rho).reshape(shape + (7,))

    def component_density(self, tag, z):
        return self.densities(z)[..., int(ComponentTag(tag))]

    def displacement(self, tag, z):
        """Pair displacement (u_x, u_y) produced by a tag-``tag`` jump with variable z."""
        z = np.asarray(z, dtype=float)
        tag = ComponentTag(tag)
        zero = np.zeros_like(z)
        if tag == ComponentTag.REFLECT_XY:
            return z, self.reflect(z)
        if tag == ComponentTag.REFLECT_YX:
            return self.reflect(z), z
        if tag == ComponentTag.SYNC:
            return z, z
        if tag in (ComponentTag.SMALL_RESIDUAL_X, ComponentTag.LARGE_RESIDUAL_X):
            return z, zero
        return zero, z

    def marginal_density(self, which, z):
        pc = self.pieces(z)
        return pc["nx"] * pc["px"] if which == "x" else pc["ny"] * pc["py"]


def _densities_from_pieces(pc, r, rho):
    small = rho <= 0.5 * r
    nux = pc["nx"] * pc["px"]
    nuy = pc["ny"] * pc["py"]
    refl = pc["nt"] * pc["q"]
    sync = np.minimum(pc["nx"], pc["ny"]) * pc["q"]
    out = np.zeros(pc["rho"].shape + (7,))
    out[:, 0] = np.where(small, 0.5 * refl, 0.0)
    out[:, 1] = out[:, 0]
    out[:, 2] = np.where(small, nux - refl, 0.0)
    out[:, 3] = np.where(small, nuy - refl, 0.0)
    out[:, 4] = np.where(small, 0.0, sync)
    out[:, 5] = np.where(small, 0.0, nux - sync)
    out[:, 6] = np.where(small, 0.0, nuy - sync)
    return out


def marginal_identity_residual(ck, z):
    """Relative mismatch between each marginal of mu and the marginal kernel at z.

    A component moving X by phi(w) contributes density at z through w = phi(z)
    (the reflection has unit Jacobian).  Returns (res_x, res_y) as arrays (or
    floats for a single point), each relative to the marginal kernel at z.
    """
    z = _as_points(z, ck.spec.d)
    shape = z.shape[:-1]
    Z = z.reshape(-1, ck.spec.d)
    rho = np.linalg.norm(Z, axis=1)
    dz = ck.densities(Z)
    dp = ck.densities(ck.reflect(Z), region_rho=rho)
    T = ComponentTag
    mx = (dz[:, T.REFLECT_XY] + dp[:, T.REFLECT_YX] + dz[:, T.SMALL_RESIDUAL_X]
          + dz[:, T.SYNC] + dz[:, T.LARGE_RESIDUAL_X])
    my = (dp[:, T.REFLECT_XY] + dz[:, T.REFLECT_YX] + dz[:, T.SMALL_RESIDUAL_Y]
          + dz[:, T.SYNC] + dz[:, T.LARGE_RESIDUAL_Y])
    nux = ck.marginal_density("x", Z)
    nuy = ck.marginal_density("y", Z)
    rx = (np.abs(mx - nux) / nux).reshape(shape)
    ry = (np.abs(my - nuy) / nuy).reshape(shape)
    if rx.ndim == 0:
        return float(rx), float(ry)
    return rx, ry
