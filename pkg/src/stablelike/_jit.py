"""
Compiled coefficient evaluators and the counter-based random stream.

Every coefficient preset is encoded as an integer kind code plus a flat
float64 parameter vector.  The same scalar routines serve the vectorised
quadrature (through the ``*_batch`` wrappers) and the path engine, so that
both sides evaluate exactly the same formula.
"""

import math

import numba as nb
import numpy as np

# the TBB layer in some installs is too old and only warns; prefer OpenMP
nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

jit = nb.njit(cache=True, nogil=True)
ijit = nb.njit(cache=True, nogil=True, inline="always")

# index field kinds
ALPHA_CONST = 0
ALPHA_BUMP = 1
ALPHA_PERIODIC = 2
ALPHA_TABLE = 3

# kernel field kinds
KERNEL_CONST = 0
KERNEL_BASS = 1
KERNEL_SDE = 2
KERNEL_SDE_DIAG = 3
KERNEL_SKEW = 4
KERNEL_COSMOD = 5
KERNEL_TABLE = 6


# ---------------------------------------------------------------------------
# multilinear tables
#
# layout: [D, n_1..n_D, axis_1, ..., axis_D, values (C order)]
# ---------------------------------------------------------------------------

@jit
def table_eval(p, q):
    D = int(p[0])
    sizes = np.empty(D, np.int64)
    for i in range(D):
        sizes[i] = int(p[1 + i])
    lo = np.empty(D, np.int64)
    frac = np.empty(D)
    pos = 1 + D
    for i in range(D):
        n = sizes[i]
        ax = p[pos:pos + n]
        qi = q[i]
        if qi <= ax[0]:
            lo[i] = 0
            frac[i] = 0.0
        elif qi >= ax[n - 1]:
            lo[i] = n - 2
            frac[i] = 1.0
        else:
            j = np.searchsorted(ax, qi, side="right") - 1
            lo[i] = j
            frac[i] = (qi - ax[j]) / (ax[j + 1] - ax[j])
        pos += n
    vals = p[pos:]
    out = 0.0
    for corner in range(1 << D):
        w = 1.0
        idx = 0
        for i in range(D):
            bit = (corner >> (D - 1 - i)) & 1
            w *= frac[i] if bit else 1.0 - frac[i]
            idx = idx * sizes[i] + lo[i] + bit
        if w != 0.0:
            out += w * vals[idx]
    return out


# ---------------------------------------------------------------------------
# coefficient evaluation
# ---------------------------------------------------------------------------

@jit
def bass_weight(a, d):
    """Normalisation making the constant-order kernel the symbol |xi|^a."""
    return (a * 2.0 ** (a - 1.0) * math.gamma(0.5 * (a + d))
            / (math.pi ** (0.5 * d) * math.gamma(1.0 - 0.5 * a)))


@jit
def alpha_eval(kind, p, x):
    d = x.shape[0]
    if kind == ALPHA_CONST:
        return p[0]
    if kind == ALPHA_BUMP:
        s = 0.0
        for i in range(d):
            s += x[i] * x[i]
        return p[0] + p[1] * math.exp(-s)
    if kind == ALPHA_PERIODIC:
        s = 0.0
        for i in range(d):
            s += p[2 + i] * x[i]
        return p[0] + p[1] * math.sin(s)
    return table_eval(p, x)


@jit
def kernel_eval(kind, p, x, z, ax):
    """n(x, z); ``ax`` is the index alpha(x), needed by the Bass kernel."""
    d = x.shape[0]
    if kind == KERNEL_CONST:
        return p[0]
    if kind == KERNEL_BASS:
        return bass_weight(ax, d)
    if kind == KERNEL_SDE:
        # p = [c, alpha, |det A|, A^{-1} row major]
        zz = 0.0
        ww = 0.0
        for i in range(d):
            zz += z[i] * z[i]
            s = 0.0
            for j in range(d):
                s += p[3 + i * d + j] * z[j]
            ww += s * s
        if zz == 0.0:
            return p[0] / p[2]
        return p[0] / p[2] * math.exp(0.5 * (d + p[1]) * math.log(zz / ww))
    if kind == KERNEL_SDE_DIAG:
        # p = [c, alpha, m (d), s (d), U (d x d) row major]
        det = 1.0
        zz = 0.0
        ww = 0.0
        for i in range(d):
            arg = 0.0
            for j in range(d):
                arg += p[2 + 2 * d + i * d + j] * x[j]
            a = p[2 + i] + p[2 + d + i] * math.sin(arg)
            det *= a
            zz += z[i] * z[i]
            ww += (z[i] / a) ** 2
        if zz == 0.0:
            return p[0] / det
        return p[0] / det * math.exp(0.5 * (d + p[1]) * math.log(zz / ww))
    if kind == KERNEL_SKEW:
        # c0 (1 + s sin<u,x> tanh<w,z>)
        ux = 0.0
        wz = 0.0
        for i in range(d):
            ux += p[2 + i] * x[i]
            wz += p[2 + d + i] * z[i]
        return p[0] * (1.0 + p[1] * math.sin(ux) * math.tanh(wz))
    if kind == KERNEL_COSMOD:
        # c0 (1 + s sin<u,x> cos<w,z>)
        ux = 0.0
        wz = 0.0
        for i in range(d):
            ux += p[2 + i] * x[i]
            wz += p[2 + d + i] * z[i]
        return p[0] * (1.0 + p[1] * math.sin(ux) * math.cos(wz))
    q = np.empty(2 * d)
    for i in range(d):
        q[i] = x[i]
        q[d + i] = z[i]
    return table_eval(p, q)


@jit
def alpha_batch(kind, p, X):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        out[i] = alpha_eval(kind, p, X[i])
    return out


@jit
def kernel_batch(kkind, kp, akind, ap, X, Z):
    """n(X[i], Z[i]) row by row; X may have a single row, broadcast over Z."""
    m = Z.shape[0]
    out = np.empty(m)
    single = X.shape[0] == 1
    ax = 0.0
    if single and kkind == KERNEL_BASS:
        ax = alpha_eval(akind, ap, X[0])
    for i in range(m):
        xi = X[0] if single else X[i]
        if kkind == KERNEL_BASS and not single:
            ax = alpha_eval(akind, ap, xi)
        out[i] = kernel_eval(kkind, kp, xi, Z[i], ax)
    return out


@jit
def bass_weight_batch(a, d):
    out = np.empty(a.shape[0])
    for i in range(a.shape[0]):
        out[i] = bass_weight(a[i], d)
    return out


# ---------------------------------------------------------------------------
# counter-based random stream (splitmix64 finaliser)
# ---------------------------------------------------------------------------

GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@ijit
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@ijit
def path_key(seed, path):
    return mix64(mix64(np.uint64(seed) + GOLDEN) ^ mix64(np.uint64(path) + np.uint64(1)))


@ijit
def uniform(key, ctr):
    """Uniform on the open interval (0, 1) for stream position ``ctr``."""
    h = mix64(key + np.uint64(ctr) * GOLDEN)
    return (np.float64(h >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@jit
def uniform_block(seed, paths, counters):
    out = np.empty((paths.shape[0], counters.shape[0]))
    for i in range(paths.shape[0]):
        key = path_key(seed, paths[i])
        for j in range(counters.shape[0]):
            out[i, j] = uniform(key, counters[j])
    return out
