"""
Regularity verdicts from simulated semigroup differences and coupling tails.

Only exponents and the shape of the time dependence are tested: constants
of the regularity bounds are fitted on a calibration cell (the largest
distance, or the first time) and checked on the remaining cells.  The
transforms here are deterministic functions of their input tables; the
``holder_fit`` and ``modulus_fit`` drivers run the simulation first.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import _as_points
from .simulate.estimates import semigroup_differences

__all__ = [
    "Z_CI",
    "SlopeFit",
    "weighted_slope",
    "HolderFit",
    "ModulusFit",
    "fit_holder",
    "fit_modulus",
    "holder_fit",
    "modulus_fit",
    "holder_envelope",
    "holder_rate",
    "modulus_envelope",
    "example16_rate",
    "TailReport",
    "tail_consistency",
    "long_rows",
]

Z_CI = 1.959963984540054
MIN_POINTS = 4
SLOPE_SLACK = 0.9


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


# ---------------------------------------------------------------------------
# slope fits
# ---------------------------------------------------------------------------

@dataclass
class SlopeFit:
    slope: float
    slope_se: float
    intercept: float
    ci: tuple
    used: np.ndarray
    chi2: float


def weighted_slope(u, diff, se, z=Z_CI):
    """Weighted OLS of log|diff| on ``u`` (a log distance) using the usable points.

    A point is usable when the CI of its difference excludes zero.  The
    standard error of log|diff| is se/|diff| (delta method) and the weights
    are 1/CI-width^2.  The slope variance is inflated by the reduced
    chi-square when that exceeds one.
    :returns: :class:`SlopeFit` (nan slope if fewer than ``MIN_POINTS`` usable points)
    """
    u = np.asarray(u, float)
    diff = np.abs(np.asarray(diff, float))
    se = np.asarray(se, float)
    used = diff > z * se
    if np.count_nonzero(used) < MIN_POINTS:
        return SlopeFit(math.nan, math.nan, math.nan, (math.nan, math.nan), used, math.nan)
    x = u[used]
    y = np.log(diff[used])
    s = se[used] / diff[used]
    # 1/s^2 is proportional to 1/CI-width^2 and gives the slope variance directly
    w = 1.0 / s ** 2
    A = np.column_stack([np.ones_like(x), x])
    AtW = A.T * w
    cov = np.linalg.inv(AtW @ A)
    coef = cov @ (AtW @ y)
    res = (y - A @ coef) / s
    dof = x.size - 2
    chi2 = float(res @ res) / dof
    cov = cov * max(1.0, chi2)
    se_b = math.sqrt(cov[1, 1])
    b = float(coef[1])
    return SlopeFit(b, se_b, float(coef[0]), (b - z * se_b, b + z * se_b), used, chi2)


# ---------------------------------------------------------------------------
# envelopes and rate curves
# ---------------------------------------------------------------------------

def holder_envelope(t, beta, alpha0, C=1.0, C0=None, eps0=None):
    """Rate envelopes in t.

    Without ``C0``: C / (t ^ 1)^{beta/alpha0}.  With ``C0`` and ``eps0``: the
    coupling bound C (eps^{-beta} + eps^{alpha0-beta} / (C0 t)) at
    eps = t^{1/alpha0} ^ eps0.
    """
    t = np.asarray(t, float)
    if C0 is None:
        return C / np.minimum(t, 1.0) ** (beta / alpha0)
    eps = np.minimum(t ** (1.0 / alpha0), eps0)
    return C * (eps ** (-beta) + eps ** (alpha0 - beta) / (C0 * t))


def modulus_envelope(phi, t, alpha0, eps0, grid=400):
    """inf over eps in (0, eps0] of 1/F(eps) - 1/(t phi'(2 eps) eps^{2-alpha0}) by grid search.

    :returns: (envelope values, minimising eps) with the shape of ``t``
    """
    t = np.atleast_1d(np.asarray(t, float))
    eps = np.geomspace(eps0 * 1e-8, eps0, grid)
    F = phi.F(eps)
    dp = phi.dphi(2.0 * eps)
    with np.errstate(divide="ignore"):
        core = np.where(dp < 0, -1.0 / (dp * eps ** (2.0 - alpha0)), np.inf)
    vals = 1.0 / F[None, :] + core[None, :] / t[:, None]
    k = np.argmin(vals, axis=1)
    return vals[np.arange(t.size), k], eps[k]


def example16_rate(name, t, alpha0, beta=1.0):
    """Closed-form rate functions of the Lipschitz ("loglog") and log-Lipschitz ("logpower") presets."""
    t = np.asarray(t, float)
    if name == "loglog":
        s = np.minimum(t, math.exp(-2.0))
        L = np.abs(np.log(s))
        return 1.0 / (s ** (1 / alpha0) * L ** (-1 / alpha0) * np.abs(np.log(L)) ** (-2 / alpha0))
    if name == "logpower":
        s = np.minimum(t, math.exp(-1.0))
        return 1.0 / (s ** (1 / alpha0) * np.abs(np.log(s)) ** (-1 / alpha0 + beta))
    raise ValueError(f"no closed-form rate for reference function {name!r}")


# ---------------------------------------------------------------------------
# Holder and modulus fits
# ---------------------------------------------------------------------------

def _calibrated_envelope(norm, diff, se, z):
    """Constant from the largest-distance cell; remaining cells must stay below it."""
    ratio = np.abs(diff) / norm
    C = (abs(diff[0]) + z * se[0]) / norm[0]
    lower = (np.abs(diff) - z * se) / norm
    return ratio, C, bool(np.all(lower[1:] <= C))


@dataclass
class HolderFit:
    """Holder exponent fit of |P_t f(x + r_k v) - P_t f(x)| against r_k.

    :ivar verdict: "pass", "fail" or "inconclusive" (fewer than 4 usable points)
    :ivar slope_route, envelope_route: the two routes to a pass, reported separately
    :ivar rate: optional out-of-sample check of C(t) (t ^ 1)^{-beta/alpha0} over a t grid
    """

    r: np.ndarray
    diff: np.ndarray
    diff_se: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    used: np.ndarray
    t: float
    beta: float
    alpha0: float
    sup_norm: float
    slope: float
    slope_se: float
    slope_ci: tuple
    ratios: np.ndarray
    constant: float
    envelope: np.ndarray
    slope_route: bool
    envelope_route: bool
    verdict: str
    crn_gain: np.ndarray = field(default=None)
    rate: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self):
        return {k: _plain(v) for k, v in asdict(self).items()}

    def rows(self):
        return long_rows(self.r, self.t, np.abs(self.diff), self.ci_lo, self.ci_hi,
                         self.envelope)


def fit_holder(r, diff, se, t, beta, alpha0, sup_norm=1.0, z=Z_CI):
    """Deterministic Holder verdict from a table of differences (see :class:`HolderFit`)."""
    r = np.asarray(r, float)
    diff = np.asarray(diff, float)
    se = np.asarray(se, float)
    order = np.argsort(-r)
    r, diff, se = r[order], diff[order], se[order]
    sf = weighted_slope(np.log(r), diff, se, z)
    ratio, C, env_ok = _calibrated_envelope(r ** beta, diff, se, z)
    envelope = C * r ** beta
    if not math.isfinite(sf.slope):
        verdict, slope_ok = "inconclusive", False
        env_ok = False
    else:
        slope_ok = sf.ci[0] >= SLOPE_SLACK * beta
        verdict = "pass" if (slope_ok or env_ok) else "fail"
    # constant of the time-rate form, C ||f|| / (t ^ 1)^{beta/alpha0}
    const = C * min(t, 1.0) ** (beta / alpha0) / sup_norm if sup_norm > 0 else math.nan
    return HolderFit(r, diff, se, np.abs(diff) - z * se, np.abs(diff) + z * se, sf.used,
                     float(t), float(beta), float(alpha0), float(sup_norm), sf.slope,
                     sf.slope_se, sf.ci, ratio, const, envelope, bool(slope_ok),
                     bool(env_ok), verdict)


def _distances(r0, K):
    return r0 * 2.0 ** (-np.arange(K + 1))


def _pair_points(spec, x, direction, r):
    d = spec.d
    x = _as_points(x, d).reshape(d).astype(float)
    v = _as_points(direction, d).reshape(d).astype(float)
    v = v / np.linalg.norm(v)
    return x, x[None, :] + r[:, None] * v[None, :]


def holder_fit(spec, f, x, direction, t, beta, cfg, rng=None, r0=0.1, K=5):
    """Simulate CRN differences at r_k = r0 2^{-k}, k = 0..K, and fit the Holder exponent.

    :param beta: target exponent in (0, alpha0 ^ 1)
    """
    a0 = spec.alpha_min
    if not 0.0 < beta < min(a0, 1.0):
        raise ValueError(f"beta must lie in (0, alpha0 ^ 1) = (0, {min(a0, 1.0):.4g})")
    r = _distances(r0, K)
    x, Y = _pair_points(spec, x, direction, r)
    sd = semigroup_differences(spec, f, x, Y, t, cfg, rng=rng)
    fit = fit_holder(r, sd.diff, sd.diff_se, t, beta, a0, f.sup_norm)
    fit.crn_gain = sd.diff_se_independent / np.where(sd.diff_se > 0, sd.diff_se, np.nan)
    return fit


def holder_rate(fits, beta, alpha0, z=Z_CI):
    """Out-of-sample check of the t-shape C (t ^ 1)^{-beta/alpha0} over fits at several t.

    The constant is taken from the first fit; every other fit's largest
    ratio (lower CI) must stay below the envelope at its time.
    """
    t = np.array([f.t for f in fits])
    sup = np.array([float(np.max(f.ratios)) for f in fits])
    lower = np.array([float(np.max((np.abs(f.diff) - z * f.diff_se) / f.r ** beta))
                      for f in fits])
    norm = holder_envelope(t, beta, alpha0)
    C = sup[0] / norm[0]
    env = C * norm
    return {"t": t, "sup_ratio": sup, "sup_ratio_lower": lower, "constant": C, "envelope": env,
            "holds": bool(np.all(lower[1:] <= env[1:]))}


@dataclass
class ModulusFit:
    """Modulus verdict: differences normalised by F(r) = int_0^r phi.

    :ivar envelope: infimum envelope at t over eps in (0, eps0]
    :ivar rate_closed_form: closed-form rate of the matching preset at t (nan otherwise)
    :ivar bounded: ratio curve stays below the calibrated constant
    """

    r: np.ndarray
    diff: np.ndarray
    diff_se: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    used: np.ndarray
    t: float
    phi: str
    alpha0: float
    eps0: float
    normaliser: np.ndarray
    ratios: np.ndarray
    constant: float
    envelope: float
    envelope_eps: float
    rate_closed_form: float
    slope: float
    slope_se: float
    slope_ci: tuple
    slope_route: bool
    bounded: bool
    verdict: str
    flags: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self):
        return {k: _plain(v) for k, v in asdict(self).items()}

    def rows(self):
        return long_rows(self.r, self.t, np.abs(self.diff), self.ci_lo, self.ci_hi,
                         self.constant * self.normaliser)


def fit_modulus(r, diff, se, t, phi, alpha0, eps0, sup_norm=1.0, z=Z_CI):
    """Deterministic modulus verdict: slope of log|diff| on log F(r) (CI lower bound >= 0.9)
    or a ratio curve |diff| / F(r) below its calibrated constant."""
    r = np.asarray(r, float)
    diff = np.asarray(diff, float)
    se = np.asarray(se, float)
    order = np.argsort(-r)
    r, diff, se = r[order], diff[order], se[order]
    Fr = phi.F(r)
    sf = weighted_slope(np.log(Fr), diff, se, z)
    ratio, C, bounded = _calibrated_envelope(Fr, diff, se, z)
    env, env_eps = modulus_envelope(phi, t, alpha0, eps0)
    try:
        closed = float(example16_rate(phi.name, t, alpha0, phi.params.get("beta", 1.0)))
    except ValueError:
        closed = math.nan
    if not math.isfinite(sf.slope):
        verdict, slope_ok, bounded = "inconclusive", False, False
    else:
        slope_ok = sf.ci[0] >= SLOPE_SLACK
        verdict = "pass" if (slope_ok or bounded) else "fail"
    const = C / (sup_norm * float(env[0])) if math.isfinite(env[0]) else math.nan
    return ModulusFit(r, diff, se, np.abs(diff) - z * se, np.abs(diff) + z * se, sf.used,
                      float(t), phi.name, float(alpha0), float(eps0), Fr, ratio, C,
                      float(env[0]), float(env_eps[0]), closed, sf.slope, sf.slope_se, sf.ci,
                      bool(slope_ok), bool(bounded), verdict,
                      {"envelope_constant": const})


def modulus_fit(spec, f, x, direction, t, phi, cfg, rng=None, r0=0.1, K=5, eps0=None):
    """Simulate CRN differences and fit them against the modulus F(r) = int_0^r phi.

    :param eps0: negativity radius from a drift profile; if omitted 0.1 is used and flagged
    """
    a0 = spec.alpha_min
    if a0 <= 1.0:
        raise ValueError("modulus fits need alpha0 > 1")
    r = _distances(r0, K)
    x, Y = _pair_points(spec, x, direction, r)
    sd = semigroup_differences(spec, f, x, Y, t, cfg, rng=rng)
    fit = fit_modulus(r, sd.diff, sd.diff_se, t, phi, a0, 0.1 if eps0 is None else eps0,
                      f.sup_norm)
    fit.flags["eps0_assumed"] = eps0 is None
    return fit


# ---------------------------------------------------------------------------
# coupling tails
# ---------------------------------------------------------------------------

@dataclass
class TailReport:
    """Margins of the coupling-tail bounds per cell (positive margin = bound holds).

    :ivar exceed_bound: (r/eps)^beta per pair
    :ivar tail_bound: r^beta [eps^{-beta} + eps^{alpha0-beta}/(C0 t)] per (pair, t)
    :ivar stop_bound: r^beta eps^{alpha0-beta} / C0 per pair
    """

    r: np.ndarray
    t: np.ndarray
    eps: float
    beta: float
    alpha0: float
    C0: float
    exceed_bound: np.ndarray
    exceed_margin: np.ndarray
    tail_bound: np.ndarray
    tail_margin: np.ndarray
    stop_bound: np.ndarray
    stop_margin: np.ndarray
    tail_monotone: bool
    passed_exceed: bool
    passed_tail: bool
    passed_stop: bool

    @property
    def passed(self):
        return self.passed_exceed and self.passed_tail and self.tail_monotone

    def to_dict(self):
        return {k: _plain(v) for k, v in asdict(self).items()}

    def rows(self):
        R = np.repeat(self.r, self.t.size)
        T = np.tile(self.t, self.r.size)
        return long_rows(R, T, self.tail.p_tail.ravel(), self.tail.p_tail_ci[..., 0].ravel(),
                         self.tail.p_tail_ci[..., 1].ravel(), self.tail_bound.ravel())


def tail_consistency(tail, beta, C0, alpha0, slack=0.25, z=3.0):
    """Compare a :class:`CouplingTail` with the bounds of the coupling argument.

    P(T > S_eps) <= (r/eps)^beta + z se; P(T >= t) <= (1 + slack) r^beta [eps^{-beta} +
    eps^{alpha0-beta}/(C0 t)]; E[T ^ S_eps] <= (1 + slack) r^beta eps^{alpha0-beta}/C0 + z se.
    """
    r, eps, t = tail.r, tail.eps, tail.t_grid
    rb = r ** beta
    ex_b = (r / eps) ** beta
    ex_m = ex_b + z * tail.p_exceed_se - tail.p_exceed
    if C0 > 0:
        tb = rb[:, None] * (eps ** (-beta) + eps ** (alpha0 - beta) / (C0 * t[None, :]))
        sb = rb * eps ** (alpha0 - beta) / C0
    else:
        tb = np.full((r.size, t.size), np.inf)
        sb = np.full(r.size, np.inf)
    tm = (1.0 + slack) * tb - tail.p_tail
    sm = (1.0 + slack) * sb + z * tail.mean_stop_se - tail.mean_stop
    mono = bool(np.all(np.diff(tail.p_tail, axis=1) <= 0)) if t.size > 1 else True
    rep = TailReport(r, t, eps, beta, alpha0, C0, ex_b, ex_m, tb, tm, sb, sm, mono,
                     bool(np.all(ex_m >= 0)), bool(np.all(tm >= 0)), bool(np.all(sm >= 0)))
    rep.tail = tail
    return rep


def long_rows(r, t, estimate, lo, hi, bound):
    """Plot-ready long format: columns (r, t, estimate, ci_lo, ci_hi, bound)."""
    r = np.atleast_1d(np.asarray(r, float))
    n = r.size
    t = np.broadcast_to(np.asarray(t, float), (n,))
    cols = ("r", "t", "estimate", "ci_lo", "ci_hi", "bound")
    data = [np.broadcast_to(np.asarray(a, float), (n,)) for a in (r, t, estimate, lo, hi, bound)]
    return cols, [tuple(float(a[i]) for a in data) for i in range(n)]
