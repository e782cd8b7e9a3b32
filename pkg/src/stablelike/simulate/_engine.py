"""
Compiled path loops.

Candidates come from a Poisson clock at the total mass of the dominating
measure g(z) = c2 |z|^{-d-a2} on {delta < |z| <= 1} plus c2 |z|^{-d-a0} on
{|z| > 1}.  Each candidate k of a path consumes the stream positions
8k + slot (slot 0: waiting time, 1: radius, 2-3: direction, 4: acceptance or
component choice), so paths are reproducible on their own and common random
numbers across starting points come for free.

Status codes: 0 ok, 1 domination violated, 2 event cap reached.
"""

import math

import numba as nb
import numpy as np

from .._jit import alpha_eval, ijit, jit, kernel_eval, path_key, uniform

OK = 0
DOMINATION = 1
OVERFLOW = 2
RATIO_SLACK = 1.0 + 1e-9

pjit = nb.njit(cache=True, nogil=True, parallel=True)


@ijit
def sphere_area(d):
    if d == 1:
        return 2.0
    if d == 2:
        return 2.0 * math.pi
    return 4.0 * math.pi


@ijit
def masses(d, c2, a0, a2, delta):
    """(inner mass, total mass) of the dominating measure."""
    om = sphere_area(d)
    inner = om * c2 * (delta ** (-a2) - 1.0) / a2
    return inner, inner + om * c2 / a0


@ijit
def radius(u, p_in, dneg, a0, a2):
    """Inverse CDF of the radial law; returns (rho, inner flag)."""
    if u < p_in:
        v = u / p_in
        return (dneg - v * (dneg - 1.0)) ** (-1.0 / a2), True
    v = (u - p_in) / (1.0 - p_in)
    return (1.0 - v) ** (-1.0 / a0), False


@ijit
def direction(d, key, base, out):
    if d == 1:
        out[0] = 1.0 if uniform(key, base + np.uint64(2)) < 0.5 else -1.0
    elif d == 2:
        th = 2.0 * math.pi * uniform(key, base + np.uint64(2))
        out[0] = math.cos(th)
        out[1] = math.sin(th)
    else:
        c = 2.0 * uniform(key, base + np.uint64(2)) - 1.0
        s = math.sqrt(max(0.0, 1.0 - c * c))
        ph = 2.0 * math.pi * uniform(key, base + np.uint64(3))
        out[0] = c
        out[1] = s * math.cos(ph)
        out[2] = s * math.sin(ph)


@ijit
def dominating(d, c2, a0, a2, rho, inner):
    return c2 * rho ** (-(d + (a2 if inner else a0)))


@ijit
def candidate(d, key, ctr, p_in, dneg, a0, a2, z):
    """Fill z with the candidate jump; returns (rho, inner flag)."""
    base = np.uint64(8) * np.uint64(ctr)
    rho, inner = radius(uniform(key, base + np.uint64(1)), p_in, dneg, a0, a2)
    direction(d, key, base, z)
    for i in range(d):
        z[i] *= rho
    return rho, inner


@ijit
def marginal_density(ak, ap, kk, kp, x, z, rho):
    ax = alpha_eval(ak, ap, x)
    d = x.shape[0]
    return kernel_eval(kk, kp, x, z, ax) * rho ** (-(d + ax))


# ---------------------------------------------------------------------------
# compensator drift on precomputed nodes
# ---------------------------------------------------------------------------

@jit
def drift(ak, ap, kk, kp, x, delta, panel_lo, rnodes, rweights, dirs, dweights, out):
    """out = -int_{delta<|z|<=1} z n(x,z)/|z|^{d+alpha(x)} dz on panels with lower edge >= delta."""
    d = x.shape[0]
    ax = alpha_eval(ak, ap, x)
    z = np.empty(d)
    for i in range(d):
        out[i] = 0.0
    for p in range(panel_lo.shape[0]):
        if panel_lo[p] < delta * (1.0 - 1e-12):
            continue
        for k in range(rnodes.shape[1]):
            rho = rnodes[p, k]
            wr = rweights[p, k] * rho ** (-1.0 - ax)
            for j in range(dirs.shape[0]):
                for i in range(d):
                    z[i] = rho * dirs[j, i]
                w = wr * dweights[j] * kernel_eval(kk, kp, x, z, ax)
                for i in range(d):
                    out[i] -= w * z[i]


@ijit
def advance(ak, ap, kk, kp, x, b, anchor, acc, tau, dt, refresh, delta,
            panel_lo, rnodes, rweights, dirs, dweights):
    """Explicit Euler over a waiting time; the drift is recomputed once x leaves the refresh ball."""
    d = x.shape[0]
    remaining = tau
    steps = 0
    while remaining > 0.0:
        h = dt if remaining > dt else remaining
        dist = 0.0
        for i in range(d):
            x[i] += b[i] * h
            acc[i] += b[i] * h
            dist += (x[i] - anchor[i]) ** 2
        remaining -= h
        steps += 1
        if dist > refresh * refresh:
            drift(ak, ap, kk, kp, x, delta, panel_lo, rnodes, rweights, dirs, dweights, b)
            for i in range(d):
                anchor[i] = x[i]
    return steps


# ---------------------------------------------------------------------------
# marginal paths
# ---------------------------------------------------------------------------

@jit
def run_marginal(ak, ap, kk, kp, x, key, t_max, delta, a0, a2, c2, exact, symmetric,
                 dt, refresh, panel_lo, rnodes, rweights, dirs, dweights,
                 max_events, record, rec_t, rec_z, acc):
    """Advance x in place up to t_max; returns (status, events, candidates, drift steps, max ratio)."""
    d = x.shape[0]
    lam_in, lam = masses(d, c2, a0, a2, delta)
    p_in = lam_in / lam
    dneg = delta ** (-a2)
    z = np.empty(d)
    b = np.zeros(d)
    anchor = x.copy()
    if not symmetric:
        drift(ak, ap, kk, kp, x, delta, panel_lo, rnodes, rweights, dirs, dweights, b)
    t = 0.0
    ctr = 0
    events = 0
    steps = 0
    max_ratio = 0.0
    while True:
        base = np.uint64(8) * np.uint64(ctr)
        tau = -math.log(uniform(key, base)) / lam
        if t + tau >= t_max:
            if not symmetric:
                steps += advance(ak, ap, kk, kp, x, b, anchor, acc, t_max - t, dt, refresh,
                                 delta, panel_lo, rnodes, rweights, dirs, dweights)
            return OK, events, ctr, steps, max_ratio
        if not symmetric:
            steps += advance(ak, ap, kk, kp, x, b, anchor, acc, tau, dt, refresh, delta,
                             panel_lo, rnodes, rweights, dirs, dweights)
        t += tau
        rho, inner = candidate(d, key, ctr, p_in, dneg, a0, a2, z)
        ctr += 1
        if exact:
            accept = True
        else:
            g = dominating(d, c2, a0, a2, rho, inner)
            ratio = marginal_density(ak, ap, kk, kp, x, z, rho) / g
            if ratio > max_ratio:
                max_ratio = ratio
            if ratio > RATIO_SLACK:
                return DOMINATION, events, ctr, steps, max_ratio
            accept = uniform(key, base + np.uint64(4)) < ratio
        if accept:
            if record:
                rec_t[events] = t
                for i in range(d):
                    rec_z[events, i] = z[i]
            for i in range(d):
                x[i] += z[i]
            events += 1
            if events >= max_events:
                return OVERFLOW, events, ctr, steps, max_ratio


@pjit
def marginal_batch(ak, ap, kk, kp, X0, seed, paths, t_max, delta, a0, a2, c2, exact,
                   symmetric, dt, refresh, panel_lo, rnodes, rweights, dirs, dweights,
                   max_events):
    """Terminal states for every path index and every starting point (common random numbers).

    :returns: (terminal (P, K, d), status (P, K), events (P, K), max ratio (P, K))
    """
    P = paths.shape[0]
    K, d = X0.shape
    out = np.empty((P, K, d))
    status = np.zeros((P, K), np.int64)
    events = np.zeros((P, K), np.int64)
    ratios = np.zeros((P, K))
    dummy_t = np.empty(1)
    dummy_z = np.empty((1, d))
    for i in nb.prange(P):
        key = path_key(seed, paths[i])
        acc = np.zeros(d)
        for k in range(K):
            x = X0[k].copy()
            st, ev, _, _, mr = run_marginal(ak, ap, kk, kp, x, key, t_max, delta, a0, a2, c2,
                                            exact, symmetric, dt, refresh, panel_lo, rnodes,
                                            rweights, dirs, dweights, max_events, False,
                                            dummy_t, dummy_z, acc)
            out[i, k] = x
            status[i, k] = st
            events[i, k] = ev
            ratios[i, k] = mr
    return out, status, events, ratios


# ---------------------------------------------------------------------------
# coupled paths
# ---------------------------------------------------------------------------

@ijit
def coupled_cutoff(r, kappa, delta_cap, delta_min):
    """Largest dyadic 2^{-k} <= kappa r, capped at delta_cap and floored at delta_min."""
    target = kappa * r
    if target >= delta_cap:
        return delta_cap
    k = math.ceil(-math.log2(target))
    dl = 2.0 ** (-k)
    return dl if dl > delta_min else delta_min


@ijit
def norm_diff(x, y):
    s = 0.0
    for i in range(x.shape[0]):
        s += (x[i] - y[i]) ** 2
    return math.sqrt(s)


@jit
def run_coupled(ak, ap, kk, kp, x, y, key, t_max, eps, eta, kappa, delta_cap, delta_min,
                a0, a2, c2, symmetric, dt, refresh, panel_lo, rnodes, rweights, dirs,
                dweights, max_events, stop_at_coupling, record, rec_t, rec_tag, rec_u,
                S, acc):
    """Coupled pair (x, y) advanced in place; S (per eps) filled with first exceedance times.

    :returns: (status, T, events, candidates, max ratio); T = inf if not coupled by t_max
    """
    d = x.shape[0]
    z = np.empty(d)
    pz = np.empty(d)
    bx = np.zeros(d)
    by = np.zeros(d)
    ancx = x.copy()
    ancy = y.copy()
    accx = acc[0]
    accy = acc[1]
    dens = np.empty(4)
    for j in range(S.shape[0]):
        S[j] = np.inf
    t = 0.0
    T = np.inf
    ctr = 0
    events = 0
    max_ratio = 0.0
    r = norm_diff(x, y)
    coupled = r <= eta
    if coupled:
        T = 0.0
        for i in range(d):
            y[i] = x[i]
        if stop_at_coupling:
            return OK, T, events, ctr, max_ratio
    for j in range(S.shape[0]):
        if r > eps[j]:
            S[j] = 0.0
    delta = coupled_cutoff(r, kappa, delta_cap, delta_min) if not coupled else delta_cap
    if not symmetric:
        drift(ak, ap, kk, kp, x, delta, panel_lo, rnodes, rweights, dirs, dweights, bx)
        drift(ak, ap, kk, kp, y, delta, panel_lo, rnodes, rweights, dirs, dweights, by)
    while True:
        lam_in, lam = masses(d, c2, a0, a2, delta)
        p_in = lam_in / lam
        dneg = delta ** (-a2)
        rate = lam if coupled else 2.0 * lam
        base = np.uint64(8) * np.uint64(ctr)
        tau = -math.log(uniform(key, base)) / rate
        last = t + tau >= t_max
        step = t_max - t if last else tau
        if not symmetric:
            advance(ak, ap, kk, kp, x, bx, ancx, accx, step, dt, refresh, delta, panel_lo,
                    rnodes, rweights, dirs, dweights)
            if coupled:
                for i in range(d):
                    y[i] = x[i]
            else:
                advance(ak, ap, kk, kp, y, by, ancy, accy, step, dt, refresh, delta, panel_lo,
                        rnodes, rweights, dirs, dweights)
        if last:
            return OK, T, events, ctr, max_ratio
        t += tau
        rho, inner = candidate(d, key, ctr, p_in, dneg, a0, a2, z)
        g = dominating(d, c2, a0, a2, rho, inner)
        ctr += 1
        u = uniform(key, base + np.uint64(4))
        tag = -1
        if coupled:
            ratio = marginal_density(ak, ap, kk, kp, x, z, rho) / g
            if ratio > max_ratio:
                max_ratio = ratio
            if ratio > RATIO_SLACK:
                return DOMINATION, T, events, ctr, max_ratio
            if u < ratio:
                tag = 4
        else:
            axx = alpha_eval(ak, ap, x)
            ayy = alpha_eval(ak, ap, y)
            nx = kernel_eval(kk, kp, x, z, axx)
            ny = kernel_eval(kk, kp, y, z, ayy)
            px = rho ** (-(d + axx))
            py = rho ** (-(d + ayy))
            qq = px if px < py else py
            if rho <= 0.5 * r:
                vz = 0.0
                for i in range(d):
                    vz += (x[i] - y[i]) * z[i]
                vz /= r * r
                for i in range(d):
                    pz[i] = z[i] - 2.0 * vz * (x[i] - y[i])
                nt = min(min(nx, ny), min(kernel_eval(kk, kp, x, pz, axx),
                                          kernel_eval(kk, kp, y, pz, ayy)))
                refl = nt * qq
                dens[0] = 0.5 * refl
                dens[1] = 0.5 * refl
                dens[2] = nx * px - refl
                dens[3] = ny * py - refl
                ncomp = 4
                offset = 0
            else:
                sync = (nx if nx < ny else ny) * qq
                dens[0] = sync
                dens[1] = nx * px - sync
                dens[2] = ny * py - sync
                ncomp = 3
                offset = 4
            total = 0.0
            for c in range(ncomp):
                total += dens[c]
            ratio = total / (2.0 * g)
            if ratio > max_ratio:
                max_ratio = ratio
            if ratio > RATIO_SLACK:
                return DOMINATION, T, events, ctr, max_ratio
            level = u * 2.0 * g
            cum = 0.0
            for c in range(ncomp):
                cum += dens[c]
                if level < cum:
                    tag = offset + c
                    break
        if tag < 0:
            continue
        # displacement pair by tag
        for i in range(d):
            if tag == 0:
                ux, uy = z[i], pz[i]
            elif tag == 1:
                ux, uy = pz[i], z[i]
            elif tag == 2 or tag == 5:
                ux, uy = z[i], 0.0
            elif tag == 3 or tag == 6:
                ux, uy = 0.0, z[i]
            else:
                ux, uy = z[i], z[i]
            x[i] += ux
            y[i] += uy
            if record:
                rec_u[events, 0, i] = ux
                rec_u[events, 1, i] = uy
        if record:
            rec_t[events] = t
            rec_tag[events] = tag
        events += 1
        if events >= max_events:
            return OVERFLOW, T, events, ctr, max_ratio
        if coupled:
            for i in range(d):
                y[i] = x[i]
            continue
        r = norm_diff(x, y)
        for j in range(S.shape[0]):
            if S[j] == np.inf and r > eps[j]:
                S[j] = t
        if r <= eta:
            coupled = True
            T = t
            for i in range(d):
                y[i] = x[i]
            if stop_at_coupling:
                return OK, T, events, ctr, max_ratio
            delta = delta_cap
        else:
            new_delta = coupled_cutoff(r, kappa, delta_cap, delta_min)
            if new_delta != delta:
                delta = new_delta
                if not symmetric:
                    drift(ak, ap, kk, kp, x, delta, panel_lo, rnodes, rweights, dirs,
                          dweights, bx)
                    drift(ak, ap, kk, kp, y, delta, panel_lo, rnodes, rweights, dirs,
                          dweights, by)
                    for i in range(d):
                        ancx[i] = x[i]
                        ancy[i] = y[i]


@pjit
def coupled_batch(ak, ap, kk, kp, X0, Y0, seed, paths, t_max, eps, eta, kappa, delta_cap,
                  delta_min, a0, a2, c2, symmetric, dt, refresh, panel_lo, rnodes, rweights,
                  dirs, dweights, max_events, stop_at_coupling):
    """Coupling and exceedance times for every path and pair.

    :returns: (T (P, K), S (P, K, E), distance at stop (P, K), status (P, K), events (P, K),
        terminal X (P, K, d), terminal Y (P, K, d)); terminal states are those at the
        coupling time when ``stop_at_coupling`` is set
    """
    P = paths.shape[0]
    K, d = X0.shape
    E = eps.shape[0]
    T = np.empty((P, K))
    S = np.empty((P, K, E))
    dist = np.empty((P, K))
    status = np.zeros((P, K), np.int64)
    events = np.zeros((P, K), np.int64)
    XT = np.empty((P, K, d))
    YT = np.empty((P, K, d))
    dt_ = np.empty(1)
    dtag = np.empty(1, np.int8)
    du = np.empty((1, 2, d))
    for i in nb.prange(P):
        key = path_key(seed, paths[i])
        acc = np.zeros((2, d))
        Si = np.empty(E)
        for k in range(K):
            x = X0[k].copy()
            y = Y0[k].copy()
            r0 = norm_diff(x, y)
            st, Tk, ev, _, _ = run_coupled(ak, ap, kk, kp, x, y, key, t_max, eps, eta * r0,
                                           kappa, delta_cap, delta_min, a0, a2, c2, symmetric,
                                           dt, refresh, panel_lo, rnodes, rweights, dirs,
                                           dweights, max_events, stop_at_coupling, False, dt_,
                                           dtag, du, Si, acc)
            T[i, k] = Tk
            for j in range(E):
                S[i, k, j] = Si[j]
            dist[i, k] = norm_diff(x, y)
            status[i, k] = st
            events[i, k] = ev
            XT[i, k] = x
            YT[i, k] = y
    return T, S, dist, status, events, XT, YT


@jit
def sample_candidates(d, seed, path, count, delta, a0, a2, c2):
    """First ``count`` candidate jumps of a path's stream with their dominating densities."""
    key = path_key(seed, path)
    lam_in, lam = masses(d, c2, a0, a2, delta)
    p_in = lam_in / lam
    dneg = delta ** (-a2)
    Z = np.empty((count, d))
    G = np.empty(count)
    z = np.empty(d)
    for k in range(count):
        rho, inner = candidate(d, key, k, p_in, dneg, a0, a2, z)
        Z[k] = z
        G[k] = dominating(d, c2, a0, a2, rho, inner)
    return Z, G
