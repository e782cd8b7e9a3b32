"""
The generator L, the coupling operator and related integrals by polar quadrature.

The compensated integrand is used exactly down to ``rho_in``; inside that
ball the second-order Taylor term of the test function is integrated in
closed form in the radius (the kernel is frozen at rho_in / 2).  Results are
accepted when two successive refinement levels agree to the requested
tolerance once the tail and inner-ball error bounds are added.
"""

from __future__ import annotations

import math

import numpy as np

from .. import _jit
from ..geometry import CoupledKernel
from ..model import _as_points
from .scheme import (QuadratureError, QuadratureScheme, QuadResult, Segment, frame_from_axis,
                     polar_integral, sphere_rule, wynn_epsilon)

__all__ = [
    "apply_generator",
    "apply_coupling_operator",
    "h4_integral",
    "compensator_drift",
]

DEFAULT_SCHEME = QuadratureScheme()


def _kernel_at(spec, x):
    ak, ap, kk, kp = spec.packed()
    X = np.ascontiguousarray(x.reshape(1, -1))

    def n(Z):
        return _jit.kernel_batch(kk, kp, ak, ap, X, np.ascontiguousarray(Z))

    return n


def _power(Z, d, a):
    rho = np.sqrt(np.einsum("ij,ij->i", Z, Z))
    return np.exp(-(d + a) * np.log(rho))


def _breaks(*points, lo, hi):
    pts = sorted({float(p) for p in points if p is not None and lo < p < hi})
    return [lo] + pts + [hi]


def _refine(evaluate, scheme, where):
    """Run successive levels until two agree.

    ``evaluate(level)`` returns (value, extra_error) where the extra error
    collects bounds that refinement does not see (tails, inner ball).
    """
    prev, _ = evaluate(0)
    last_err = math.inf
    for level in range(1, scheme.max_level + 1):
        cur, extra = evaluate(level)
        err = float(np.max(np.abs(np.asarray(cur) - np.asarray(prev)))) + extra
        scale = float(np.max(np.abs(cur)))
        if err <= scheme.tol_abs + scheme.tol_rel * scale:
            return QuadResult(cur, err, level)
        prev, last_err = cur, err
    raise QuadratureError(f"quadrature tolerance not met at {where}: estimate {last_err:.3e}",
                          estimate=last_err, value=prev, where=where)


# ---------------------------------------------------------------------------
# generator
# ---------------------------------------------------------------------------

def apply_generator(spec, f, x, q=None, full_output=False):
    """L f(x) for a C^2 field ``f`` (see :mod:`stablelike.fields`).

    :returns: float, or :class:`QuadResult` with the error estimate when
        ``full_output`` is set
    :raises QuadratureError: if the tolerance is not met after ``q.max_level`` refinements
    """
    q = DEFAULT_SCHEME if q is None else q
    d = spec.d
    x = _as_points(x, d).reshape(d).astype(float)
    if f.affine and np.all(f.grad(x) == 0):
        res = QuadResult(0.0, 0.0, 0)
        return res if full_output else 0.0
    ax = float(spec.alpha(x))
    a0 = spec.alpha_min
    c2 = spec.c_upper
    omega = spec.omega
    nfun = _kernel_at(spec, x)
    f0 = float(f.value(x[None, :])[0])
    g = np.asarray(f.grad(x), dtype=float)
    H = np.asarray(f.hess(x), dtype=float)
    frame = frame_from_axis(f.axis, d)
    rho_in = q.rho_in
    ell = min(f.scale, 1.0)
    R_struct = f.structure_radius(x)

    def nu(Z):
        return nfun(Z) * _power(Z, d, ax)

    def compensated(Z, flags):
        val = f.value(x + Z) - f0
        if flags["comp"]:
            val = val - Z @ g
        return val * nu(Z)

    # inner ball: second-order Taylor term, kernel frozen at rho_in / 2
    def inner(level):
        dirs, wa = sphere_rule(d, q.angular_order * 2 ** level, frame)
        quad = 0.5 * np.einsum("ij,jk,ik->i", dirs, H, dirs)
        nvals = nfun(0.5 * rho_in * dirs)
        return float(wa @ (quad * nvals)) * rho_in ** (2.0 - ax) / (2.0 - ax)

    inner0 = inner(0)
    inner_err = abs(inner0) * (rho_in / ell) ** 2
    if not spec.symmetric:
        inner_err += abs(inner0) * rho_in / ell

    osc = None
    if f.affine:
        # the integrand reduces to <g,z> 1{|z|>1}, which cancels for symmetric kernels
        if spec.symmetric:
            tail = 0.0
            R_out = 10.0
        elif a0 > 1.0:
            coef = float(np.linalg.norm(g)) * c2 * omega / (a0 - 1.0)
            R_out = q.tail_radius(coef, a0 - 1.0)
            tail = coef * R_out ** (1.0 - a0)
        else:
            raise ValueError("affine test field needs alpha_min > 1 for a non-symmetric kernel")
    elif f.wavenumber is not None and R_struct is None:
        osc = _oscillatory_layout(f, q)
        R_out = osc["R_osc"]
        tail = 0.0
    else:
        if R_struct is not None and f.far_value is not None:
            coef = abs(f.far_value - f0) * c2 * omega / a0
        elif math.isfinite(f.sup_norm):
            coef = 2.0 * f.sup_norm * c2 * omega / a0
        else:
            raise ValueError("unbounded non-affine test fields are not supported")
        R_out = q.tail_radius(coef, a0, floor=max(10.0, 2.0 * (R_struct or 0.0)))
        tail = coef * R_out ** (-a0)

    edges = _breaks(1.0, R_struct, *f.radial_breaks(x), lo=rho_in, hi=R_out)
    cap = min(0.25 * f.scale, 1.0)
    cap_end = R_out if osc is not None else (R_struct if R_struct is not None else 1.0)
    segs = [Segment(a, b, cap if a < cap_end else math.inf, {"comp": b <= 1.0},
                    osc["angular"] if osc is not None else None)
            for a, b in zip(edges[:-1], edges[1:])]

    def evaluate(level):
        val = float(polar_integral(compensated, d, frame, segs, level, q)) + inner(level)
        err = tail + inner_err
        if osc is not None:
            tv, te = _oscillatory_tail(f, x, f0, nu, d, frame, osc, level, q, c2, a0, omega)
            val += tv
            err += te
        return val, err

    res = _refine(evaluate, q, where=f"x={x.tolist()}")
    return res if full_output else float(res.value)


def _oscillatory_layout(f, q):
    k = f.wavenumber
    half = math.pi / k
    R_osc = max(2.0, 8.0 * half)

    def angular(rho):
        # multiplier so that the angular rule resolves cos(k rho cos theta)
        return max(1.0, (1.3 * k * rho + 12.0) / q.angular_order)

    return {"k": k, "half": half, "R_osc": R_osc, "angular": angular}


def _oscillatory_tail(f, x, f0, nu, d, frame, osc, level, q, c2, a0, omega):
    """int_{|z|>R_osc} (f(x+z) - f(x)) nu dz.

    The f(x+z) part is summed over half-period shells and extrapolated with
    the epsilon algorithm; the -f(x) part is a plain kernel-mass integral on
    a geometric grid whose truncation is bounded by the majorant c2 |z|^{-d-alpha0}.
    """
    half = osc["half"]
    R0 = osc["R_osc"]
    sums = []
    running = 0.0
    shell = lambda Z, fl: f.value(x + Z) * nu(Z)
    for j in range(q.shells):
        seg = Segment(R0 + j * half, R0 + (j + 1) * half, half, {}, osc["angular"])
        running += float(polar_integral(shell, d, frame, [seg], level, q))
        sums.append(running)
    value, err = wynn_epsilon(sums)
    if f0 != 0.0:
        coef = abs(f0) * c2 * omega / a0
        R_big = q.tail_radius(coef, a0, floor=10.0 * R0)
        mass = float(polar_integral(lambda Z, fl: nu(Z), d, frame,
                                    [Segment(R0, R_big, math.inf, {})], level, q))
        value -= f0 * mass
        err += coef * R_big ** (-a0)
    return value, err


# ---------------------------------------------------------------------------
# coupling operator
# ---------------------------------------------------------------------------

def apply_coupling_operator(ck, F, q=None, full_output=False):
    """Coupling operator applied to a bivariate C^2 field at the pair of ``ck``.

    Sum over the seven components of the compensated integrals
    int (F((x,y) + u(z)) - F(x,y) - <grad F, u(z)> 1{|z|<=1}) mu_tag(z) dz.
    """
    if not isinstance(ck, CoupledKernel):
        raise TypeError("expected a CoupledKernel")
    q = DEFAULT_SCHEME if q is None else q
    spec = ck.spec
    d = spec.d
    x, y, r = ck.x, ck.y, ck.r
    if getattr(F, "constant", False):
        res = QuadResult(0.0, 0.0, 0)
        return res if full_output else 0.0
    F0 = float(F.value(x[None, :], y[None, :])[0])
    G = np.asarray(F.grad(x, y), dtype=float)
    gx, gy = G[:d], G[d:]
    H = np.asarray(F.hess(x, y), dtype=float)
    frame = frame_from_axis(ck.v, d)
    a0 = spec.alpha_min
    ax, ay = ck.alpha_x, ck.alpha_y
    amin = min(ax, ay)
    rho_in = min(q.rho_in, 1e-3 * r)
    ell = min(F.scale, 1.0, r)
    if not math.isfinite(F.sup_norm):
        raise ValueError("coupling operator needs a bounded bivariate field")

    def integrand(Z, flags):
        pc = ck.pieces(Z)
        comp = flags["comp"]
        Pz = pc["phi"]
        zero = np.zeros_like(Z)
        if flags["small"]:
            refl = pc["nt"] * pc["q"]
            dens = (0.5 * refl, 0.5 * refl, pc["nx"] * pc["px"] - refl,
                    pc["ny"] * pc["py"] - refl)
            moves = ((Z, Pz), (Pz, Z), (Z, zero), (zero, Z))
        else:
            sync = np.minimum(pc["nx"], pc["ny"]) * pc["q"]
            dens = (sync, pc["nx"] * pc["px"] - sync, pc["ny"] * pc["py"] - sync)
            moves = ((Z, Z), (Z, zero), (zero, Z))
        total = np.zeros(Z.shape[0])
        for w, (u1, u2) in zip(dens, moves):
            val = F.value(x + u1, y + u2) - F0
            if comp:
                val = val - (u1 @ gx + u2 @ gy)
            total += w * val
        return total

    def quadform(u1, u2):
        u = np.concatenate([u1, u2], axis=1)
        return 0.5 * np.einsum("ij,jk,ik->i", u, H, u)

    def inner(level):
        dirs, wa = sphere_rule(d, q.angular_order * 2 ** level, frame)
        pc = ck.pieces(0.5 * rho_in * dirs)
        ph = ck.reflect(dirs)
        zero = np.zeros_like(dirs)
        I = lambda a: rho_in ** (2.0 - a) / (2.0 - a)
        mixed = 0.5 * (quadform(dirs, ph) + quadform(ph, dirs)) - quadform(dirs, zero) \
            - quadform(zero, dirs)
        out = I(amin) * float(wa @ (pc["nt"] * mixed))
        out += I(ax) * float(wa @ (pc["nx"] * quadform(dirs, zero)))
        out += I(ay) * float(wa @ (pc["ny"] * quadform(zero, dirs)))
        return out

    inner0 = inner(0)
    inner_err = abs(inner0) * (rho_in / ell) ** 2
    if not spec.symmetric:
        inner_err += abs(inner0) * rho_in / ell

    R_s = F.structure_radius(x, y)
    tail_coef = 2.0 * F.sup_norm * 2.0 * spec.c_upper * spec.omega / a0
    R_out = q.tail_radius(tail_coef, a0, floor=max(10.0, 2.0 * (R_s or 0.0)))
    edges = _breaks(0.5 * r, 1.0, R_s, *F.radial_breaks(x, y), lo=rho_in, hi=R_out)
    cap = min(0.25 * F.scale, 1.0)
    cap_end = R_s if R_s is not None else 1.0
    segs = [Segment(a, b, cap if a < cap_end else math.inf,
                    {"comp": b <= 1.0, "small": b <= 0.5 * r * (1 + 1e-15)})
            for a, b in zip(edges[:-1], edges[1:])]

    tail = tail_coef * R_out ** (-a0)

    def evaluate(level):
        return float(polar_integral(integrand, d, frame, segs, level, q)) + inner(level), \
            tail + inner_err

    res = _refine(evaluate, q, where=f"x={x.tolist()}, y={y.tolist()}")
    return res if full_output else float(res.value)


# ---------------------------------------------------------------------------
# auxiliary integrals
# ---------------------------------------------------------------------------

def h4_integral(spec, x, y, q=None, full_output=False):
    """|x-y|^{a_min - 2} int_{r/2<|z|<=1} <x-y, z> (nu_y(z) - nu_x(z)) dz, a_min = alpha(x) ^ alpha(y)."""
    q = DEFAULT_SCHEME if q is None else q
    d = spec.d
    x = _as_points(x, d).reshape(d).astype(float)
    y = _as_points(y, d).reshape(d).astype(float)
    u = x - y
    r = float(np.linalg.norm(u))
    if not 0.0 < r <= 1.0:
        raise ValueError("h4 integral needs 0 < |x-y| <= 1")
    ax, ay = float(spec.alpha(x)), float(spec.alpha(y))
    if spec.index.is_constant and not spec.kernel.x_dependent:
        res = QuadResult(0.0, 0.0, 0)
        return res if full_output else 0.0
    nx, ny = _kernel_at(spec, x), _kernel_at(spec, y)
    frame = frame_from_axis(u, d)

    def integrand(Z, flags):
        return (Z @ u) * (ny(Z) * _power(Z, d, ay) - nx(Z) * _power(Z, d, ax))

    segs = [Segment(0.5 * r, 1.0, math.inf, {})]
    scale = r ** (min(ax, ay) - 2.0)

    def evaluate(level):
        return scale * float(polar_integral(integrand, d, frame, segs, level, q)), 0.0

    res = _refine(evaluate, q, where=f"x={x.tolist()}, y={y.tolist()}")
    return res if full_output else float(res.value)


def compensator_drift(spec, x, delta, q=None):
    """b(x) = -int_{delta<|z|<=1} z n(x,z)/|z|^{d+alpha(x)} dz (zero for symmetric kernels)."""
    q = DEFAULT_SCHEME if q is None else q
    d = spec.d
    x = _as_points(x, d).reshape(d).astype(float)
    if spec.symmetric:
        return np.zeros(d)
    ax = float(spec.alpha(x))
    nfun = _kernel_at(spec, x)

    def integrand(Z, flags):
        return -Z * (nfun(Z) * _power(Z, d, ax))[:, None]

    segs = [Segment(delta, 1.0, math.inf, {})]
    res = _refine(lambda level: (np.asarray(polar_integral(integrand, d, None, segs, level, q)),
                                 0.0), q, where=f"x={x.tolist()}")
    return np.asarray(res.value)
