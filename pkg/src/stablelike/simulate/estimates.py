"""
Monte Carlo estimators built on the path engine.

Semigroup values P_t f(x) are plain averages of f(X_t).  Differences between
starting points reuse the same path indices, hence the same candidate
streams (common random numbers).  Coupling tails summarise coupling and
exceedance times of the coupled pair with binomial and CLT intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..model import _as_points
from .paths import coupled_outcomes, marginal_terminal

__all__ = [
    "estimate_semigroup",
    "semigroup_differences",
    "SemigroupDifferences",
    "CouplingTail",
    "estimate_coupling_tail",
    "binomial_ci",
]

Z_975 = float(stats.norm.ppf(0.975))


def binomial_ci(k, n, level=0.95):
    """Wilson interval for a binomial proportion; returns (p_hat, se, lo, hi)."""
    if n == 0:
        return math.nan, math.nan, 0.0, 1.0
    p = k / n
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return p, math.sqrt(max(p * (1 - p), 0.0) / n), float(ci.low), float(ci.high)


def _check_bounded(f):
    sup = float(getattr(f, "sup_norm", math.inf))
    if not math.isfinite(sup):
        raise ValueError("f must be bounded with a declared sup norm")
    return sup


def estimate_semigroup(spec, f, x, t, cfg, rng=None):
    """Monte Carlo estimate of P_t f(x) = E^x f(X_t).

    :param f: bounded field with ``sup_norm``
    :returns: (mean, standard error); |mean| <= ||f||_inf
    """
    sup = _check_bounded(f)
    X = marginal_terminal(spec, _as_points(x, spec.d).reshape(1, spec.d), cfg, rng=rng,
                          t=t)[:, 0, :]
    v = np.asarray(f(X), dtype=float)
    mean = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    # summation rounding can push an average of bounded values past the bound
    return float(np.clip(mean, -sup, sup)), se


@dataclass
class SemigroupDifferences:
    """P_t f at a base point and at displaced points, with paired differences.

    :ivar values, se: estimates of P_t f(y_k) and their standard errors
    :ivar diff, diff_se: P_t f(y_k) - P_t f(x) with the CRN standard error
    :ivar diff_se_independent: standard error the same difference would have with independent runs
    """

    x: np.ndarray
    points: np.ndarray
    distances: np.ndarray
    t: float
    base: float
    base_se: float
    values: np.ndarray
    se: np.ndarray
    diff: np.ndarray
    diff_se: np.ndarray
    diff_se_independent: np.ndarray
    paths: int


def semigroup_differences(spec, f, x, points, t, cfg, rng=None):
    """Paired estimates of P_t f(y_k) - P_t f(x) from common random numbers.

    :param points: displaced points y_k, shape (K, d)
    """
    _check_bounded(f)
    d = spec.d
    x = _as_points(x, d).reshape(d).astype(float)
    Y = _as_points(points, d).reshape(-1, d).astype(float)
    X = marginal_terminal(spec, np.vstack([x, Y]), cfg, rng=rng, t=t)
    P = X.shape[0]
    V = np.asarray(f(X.reshape(-1, d)), dtype=float).reshape(P, -1)
    mean = V.mean(axis=0)
    sd = V.std(axis=0, ddof=1) if P > 1 else np.zeros(V.shape[1])
    D = V[:, 1:] - V[:, :1]
    dsd = D.std(axis=0, ddof=1) if P > 1 else np.zeros(D.shape[1])
    root = math.sqrt(P)
    return SemigroupDifferences(x, Y, np.linalg.norm(Y - x, axis=1), float(t), float(mean[0]),
                                float(sd[0] / root), mean[1:], sd[1:] / root, D.mean(axis=0),
                                dsd / root, np.sqrt(sd[0] ** 2 + sd[1:] ** 2) / root, P)


@dataclass
class CouplingTail:
    """Coupling-time statistics per starting pair.

    :ivar r: pair distances
    :ivar p_exceed: P(T > S_eps) with (se, lo, hi) rows
    :ivar p_tail: P(T >= t) per (pair, t) with se/lo/hi arrays of the same shape
    :ivar mean_stop: E[T ^ S_eps ^ t_max] with CLT standard error
    :ivar censored: fraction of paths with neither T nor S_eps resolved by t_max
    :ivar eta_shift: change of P(T > S_eps) when the coincidence threshold is divided by 10
    """

    r: np.ndarray
    eps: float
    t_grid: np.ndarray
    t_max: float
    paths: int
    p_exceed: np.ndarray
    p_exceed_se: np.ndarray
    p_exceed_ci: np.ndarray
    p_tail: np.ndarray
    p_tail_se: np.ndarray
    p_tail_ci: np.ndarray
    mean_stop: np.ndarray
    mean_stop_se: np.ndarray
    censored: np.ndarray
    eta_rel: float
    eta_shift: np.ndarray = field(default=None)
    eta_shift_se: np.ndarray = field(default=None)

    def rows(self):
        """Long format: one row per (pair, t); exceedance columns repeat per pair."""
        cols = ("r", "t", "p_tail", "p_tail_se", "p_tail_lo", "p_tail_hi", "p_exceed",
                "p_exceed_se", "p_exceed_lo", "p_exceed_hi", "mean_stop", "mean_stop_se",
                "censored")
        out = []
        for i, r in enumerate(self.r):
            for j, t in enumerate(self.t_grid):
                out.append((float(r), float(t), float(self.p_tail[i, j]),
                            float(self.p_tail_se[i, j]), float(self.p_tail_ci[i, j, 0]),
                            float(self.p_tail_ci[i, j, 1]), float(self.p_exceed[i]),
                            float(self.p_exceed_se[i]), float(self.p_exceed_ci[i, 0]),
                            float(self.p_exceed_ci[i, 1]), float(self.mean_stop[i]),
                            float(self.mean_stop_se[i]), float(self.censored[i])))
        return cols, out


def _summarise(T, S, t_grid, t_max):
    P, K = T.shape
    p_ex = np.empty(K)
    p_ex_se = np.empty(K)
    p_ex_ci = np.empty((K, 2))
    p_t = np.empty((K, t_grid.size))
    p_t_se = np.empty_like(p_t)
    p_t_ci = np.empty(p_t.shape + (2,))
    m = np.empty(K)
    m_se = np.empty(K)
    cens = np.empty(K)
    for k in range(K):
        Tk, Sk = T[:, k], S[:, k]
        # S < T is resolved whenever S is finite; T < S whenever T is finite first
        ex = np.count_nonzero(Sk < Tk)
        p_ex[k], p_ex_se[k], p_ex_ci[k, 0], p_ex_ci[k, 1] = binomial_ci(ex, P)
        for j, t in enumerate(t_grid):
            p_t[k, j], p_t_se[k, j], p_t_ci[k, j, 0], p_t_ci[k, j, 1] = binomial_ci(
                np.count_nonzero(Tk >= t), P)
        stop = np.minimum(np.minimum(Tk, Sk), t_max)
        m[k] = stop.mean()
        m_se[k] = stop.std(ddof=1) / math.sqrt(P) if P > 1 else 0.0
        cens[k] = np.count_nonzero(~np.isfinite(Tk) & ~np.isfinite(Sk)) / P
    return p_ex, p_ex_se, p_ex_ci, p_t, p_t_se, p_t_ci, m, m_se, cens


def estimate_coupling_tail(spec, pairs, t_grid, eps, cfg, rng=None, sensitivity=True):
    """Empirical P(T > S_eps), P(T >= t) and E[T ^ S_eps] per starting pair.

    :param pairs: sequence of (x, y) with |x - y| < eps
    :param t_grid: times at which P(T >= t) is reported (must not exceed ``cfg.t_max``)
    :param sensitivity: rerun with eta_rel / 10 (same streams) and report the shift of P(T > S_eps)
    """
    d = spec.d
    X0 = np.array([_as_points(p[0], d).reshape(d) for p in pairs], dtype=float)
    Y0 = np.array([_as_points(p[1], d).reshape(d) for p in pairs], dtype=float)
    r = np.linalg.norm(X0 - Y0, axis=1)
    if np.any(r >= eps):
        raise ValueError("pair distances must be smaller than eps")
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid > cfg.t_max):
        raise ValueError("t grid exceeds the simulation horizon")
    o = coupled_outcomes(spec, X0, Y0, cfg, eps=[eps], rng=rng)
    T, S = o["T"], o["S"][..., 0]
    summary = _summarise(T, S, t_grid, cfg.t_max)
    tail = CouplingTail(r, float(eps), t_grid, float(cfg.t_max), T.shape[0], *summary,
                        cfg.eta_rel)
    if sensitivity:
        o2 = coupled_outcomes(spec, X0, Y0, cfg, eps=[eps], rng=rng, eta_rel=cfg.eta_rel / 10)
        a = (S < T).astype(float)
        b = (o2["S"][..., 0] < o2["T"]).astype(float)
        tail.eta_shift = (b - a).mean(axis=0)
        tail.eta_shift_se = (b - a).std(axis=0, ddof=1) / math.sqrt(T.shape[0]) \
            if T.shape[0] > 1 else np.zeros(len(r))
    tail.T = T
    tail.S = S
    return tail
