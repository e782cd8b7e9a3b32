"""
Marginal and coupled path simulation by thinning.

Single-path calls keep the full event log; batch calls return terminal
states or coupling outcomes only.  Both go through the same compiled loops,
so a path index yields identical events in either mode.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..geometry import ComponentTag
from ..model import _as_points
from ..quadops.scheme import _gauss_legendre, sphere_rule
from . import _engine
from .dominating import majorant
from .rng import CounterRNG

__all__ = [
    "SimConfig",
    "MarginalPath",
    "CoupledPath",
    "CouplingOutcome",
    "SimulationError",
    "DominationError",
    "TruncationError",
    "simulate_marginal",
    "simulate_coupled",
    "marginal_terminal",
    "coupled_outcomes",
]


class SimulationError(RuntimeError):
    pass


class DominationError(SimulationError):
    """A candidate had acceptance ratio above one: the majorant is misconfigured."""


class TruncationError(SimulationError):
    """The per-path event cap was reached; ``partial`` holds what was simulated."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters.

    :param t_max: time horizon (for coupled runs: the cap up to which T and S_eps are resolved)
    :param delta_cut: small-jump cutoff of marginal runs; smaller jumps are dropped and
        the compensator over delta_cut < |z| <= 1 becomes a drift
    :param paths: number of Monte Carlo paths
    :param seed: seed of the counter-based streams
    :param max_events: per-path cap on accepted events
    :param dt: explicit Euler substep for the drift
    :param refresh: the drift is recomputed when the state leaves a ball of this radius
    :param eta_rel: coupling is declared at |X - Y| <= eta_rel |x0 - y0|
    :param kappa: coupled runs use the dyadic cutoff 2^{-k} <= kappa |X - Y|, capped at
        ``delta_cut`` (so the coupled marginals are never truncated more coarsely than a
        marginal run) and floored at ``delta_min``
    :param delta_min: lower bound of the coupled cutoff
    :param log_capacity: event log length of single-path runs
    """

    t_max: float = 1.0
    delta_cut: float = 1e-4
    paths: int = 1000
    seed: int = 0
    max_events: int = 10 ** 8
    dt: float = 1e-3
    refresh: float = 0.05
    eta_rel: float = 1e-6
    kappa: float = 0.05
    delta_min: float = 1e-12
    log_capacity: int = 1 << 20

    def __post_init__(self):
        if not self.t_max >= 0:
            raise ValueError("time horizon must be nonnegative")
        if not 0.0 < self.delta_cut < 1.0:
            raise ValueError("delta_cut must lie in (0, 1)")
        if not 0.0 < self.delta_min <= self.delta_cut:
            raise ValueError("coupled cutoff floor must satisfy 0 < delta_min <= delta_cut")
        if self.paths < 1 or self.max_events < 1 or self.log_capacity < 1:
            raise ValueError("path and event counts must be positive")
        if self.dt <= 0 or self.refresh <= 0 or self.kappa <= 0:
            raise ValueError("dt, refresh and kappa must be positive")
        if not 0.0 < self.eta_rel < 1.0:
            raise ValueError("eta_rel must lie in (0, 1)")

    def to_dict(self):
        return asdict(self)

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return SimConfig(**d)


@dataclass
class MarginalPath:
    """A marginal path with its event log.

    :ivar times, jumps: accepted events
    :ivar drift_total: integrated compensator drift
    :ivar drift_steps: number of Euler substeps
    """

    x0: np.ndarray
    t_max: float
    times: np.ndarray
    jumps: np.ndarray
    terminal: np.ndarray
    drift_total: np.ndarray
    drift_steps: int
    candidates: int
    max_ratio: float
    status: int = 0

    def replay(self):
        return self.x0 + self.jumps.sum(axis=0) + self.drift_total

    @property
    def replay_error(self):
        return float(np.max(np.abs(self.replay() - self.terminal)))


@dataclass
class CoupledPath:
    """A coupled pair path with its event log.

    :ivar tags: ComponentTag value per event
    :ivar ux, uy: displacements of the two marginals per event
    :ivar T: coupling time (inf if not coupled by the horizon)
    :ivar S: eps -> first time |X - Y| > eps (inf if never)
    """

    x0: np.ndarray
    y0: np.ndarray
    t_max: float
    times: np.ndarray
    tags: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    T: float
    S: dict
    terminal_x: np.ndarray
    terminal_y: np.ndarray
    drift_x: np.ndarray
    drift_y: np.ndarray
    eta: float
    candidates: int
    max_ratio: float
    status: int = 0

    @property
    def coupled(self):
        return math.isfinite(self.T)

    def replay(self):
        """Replayed states at the horizon, with Y following X after the coupling time."""
        x = self.x0 + self.ux.sum(axis=0) + self.drift_x
        if not self.coupled:
            return x, self.y0 + self.uy.sum(axis=0) + self.drift_y
        return x, x.copy()

    def distances(self):
        """|X - Y| right after each event (drift-free replay for symmetric kernels)."""
        dx = np.cumsum(self.ux - self.uy, axis=0)
        return np.linalg.norm(self.x0 - self.y0 + dx, axis=1)

    def outcome(self):
        return CouplingOutcome(self.T, {e: s < self.T for e, s in self.S.items()}, dict(self.S),
                               float(np.linalg.norm(self.terminal_x - self.terminal_y)),
                               int(self.times.size))


@dataclass(frozen=True)
class CouplingOutcome:
    T: float
    hit: dict
    S: dict
    distance: float
    events: int


# ---------------------------------------------------------------------------
# drift quadrature nodes
# ---------------------------------------------------------------------------

_NODE_CACHE = {}


def _drift_nodes(d, delta_lo, extra=()):
    """Gauss-Legendre panels in log radius on [delta_lo, 1] split at dyadic radii and ``extra``."""
    key = (d, float(delta_lo), tuple(sorted(extra)))
    if key in _NODE_CACHE:
        return _NODE_CACHE[key]
    k = int(math.ceil(-math.log2(delta_lo)))
    edges = sorted({1.0, delta_lo, *[2.0 ** -j for j in range(k + 1) if 2.0 ** -j >= delta_lo],
                    *[e for e in extra if delta_lo <= e < 1.0]})
    t, w = _gauss_legendre(10)
    lo = []
    nodes = []
    weights = []
    for a, b in zip(edges[:-1], edges[1:]):
        sl, sh = math.log(a), math.log(b)
        s = 0.5 * (sh - sl) * t + 0.5 * (sh + sl)
        rho = np.exp(s)
        lo.append(a)
        nodes.append(rho)
        weights.append(0.5 * (sh - sl) * w * rho)
    dirs, dw = sphere_rule(d, {1: 2, 2: 48, 3: 24}[d])
    out = (np.array(lo), np.array(nodes), np.array(weights), np.ascontiguousarray(dirs),
           np.ascontiguousarray(dw))
    _NODE_CACHE[key] = out
    return out


def _engine_args(spec, delta, symmetric_override=None):
    ak, ap, kk, kp = spec.packed()
    m = majorant(spec, delta)
    symmetric = spec.symmetric if symmetric_override is None else symmetric_override
    if symmetric:
        d = spec.d
        nodes = (np.zeros(0), np.zeros((0, 1)), np.zeros((0, 1)), np.zeros((1, d)), np.zeros(1))
    else:
        nodes = None
    return ak, ap, kk, kp, m, symmetric, nodes


def _rng_of(cfg, rng):
    return CounterRNG(cfg.seed) if rng is None else rng


# ---------------------------------------------------------------------------
# marginal
# ---------------------------------------------------------------------------

def simulate_marginal(spec, x0, cfg, rng=None, path=0):
    """One marginal path up to ``cfg.t_max`` with its event log.

    :raises DominationError: if a candidate ratio exceeds one
    :raises TruncationError: if the event log fills up (partial path attached)
    """
    d = spec.d
    rng = _rng_of(cfg, rng)
    x = _as_points(x0, d).reshape(d).astype(float).copy()
    x_init = x.copy()
    ak, ap, kk, kp, m, symmetric, nodes = _engine_args(spec, cfg.delta_cut)
    if nodes is None:
        nodes = _drift_nodes(d, cfg.delta_cut)
    cap = int(min(cfg.max_events, cfg.log_capacity))
    rec_t = np.empty(cap)
    rec_z = np.empty((cap, d))
    acc = np.zeros(d)
    # numba boxes uint64 results as Python ints; keep the key unsigned
    key = np.uint64(_engine.path_key(rng.seed_u64, np.uint64(rng.path_offset + path)))
    if cfg.t_max == 0:
        st, ev, cand, steps, mr = 0, 0, 0, 0, 0.0
    else:
        st, ev, cand, steps, mr = _engine.run_marginal(
            ak, ap, kk, kp, x, key, float(cfg.t_max), m.delta, m.a0, m.a2, m.c2, m.exact,
            symmetric, cfg.dt, cfg.refresh, *nodes, cap, True, rec_t, rec_z, acc)
    mp = MarginalPath(x_init, cfg.t_max, rec_t[:ev].copy(), rec_z[:ev].copy(), x, acc, int(steps),
                      int(cand), float(mr), int(st))
    _raise_status(st, mp)
    return mp


def _raise_status(status, partial=None):
    status = np.asarray(status)
    if np.any(status == _engine.DOMINATION):
        raise DominationError("acceptance ratio above one: the dominating measure does not "
                              "majorise the jump kernel")
    if np.any(status == _engine.OVERFLOW):
        raise TruncationError("event cap reached before the horizon", partial)


def marginal_terminal(spec, X0, cfg, rng=None, paths=None, t=None):
    """Terminal states X_t for every path and starting point (common random numbers).

    :param X0: starting points (K, d)
    :param paths: number of paths (default ``cfg.paths``)
    :returns: array (paths, K, d)
    """
    d = spec.d
    rng = _rng_of(cfg, rng)
    X0 = np.ascontiguousarray(_as_points(X0, d).reshape(-1, d).astype(float))
    P = cfg.paths if paths is None else int(paths)
    t = cfg.t_max if t is None else float(t)
    idx = rng.path_indices(P)
    if t == 0:
        return np.broadcast_to(X0, (P,) + X0.shape).copy()
    ak, ap, kk, kp, m, symmetric, nodes = _engine_args(spec, cfg.delta_cut)
    if nodes is None:
        nodes = _drift_nodes(d, cfg.delta_cut)
    homogeneous = spec.index.is_constant and not spec.kernel.x_dependent
    starts = np.zeros((1, d)) if homogeneous else X0
    out, status, _, _ = _engine.marginal_batch(
        ak, ap, kk, kp, starts, rng.seed_u64, idx, t, m.delta, m.a0, m.a2, m.c2, m.exact,
        symmetric, cfg.dt, cfg.refresh, *nodes, int(cfg.max_events))
    _raise_status(status)
    if homogeneous:
        # translation invariance: identical streams give identical increments
        out = out + X0[None, :, :]
    return out


# ---------------------------------------------------------------------------
# coupled
# ---------------------------------------------------------------------------

def _coupled_nodes(spec, cfg):
    if spec.symmetric:
        return None
    return _drift_nodes(spec.d, cfg.delta_min, extra=(cfg.delta_cut,))


def simulate_coupled(spec, x0, y0, cfg, eps=(), rng=None, path=0, stop_at_coupling=False):
    """One coupled path with its event log.

    Before coupling, candidates arrive at twice the marginal majorant rate and
    are attributed to a component with probability density / (2 g); after the
    coupling time the pair moves synchronously (Y = X).

    :param eps: separations for which the first exceedance time S_eps is recorded
    """
    d = spec.d
    rng = _rng_of(cfg, rng)
    x = _as_points(x0, d).reshape(d).astype(float).copy()
    y = _as_points(y0, d).reshape(d).astype(float).copy()
    r0 = float(np.linalg.norm(x - y))
    if r0 == 0:
        raise ValueError("coupled simulation needs x0 != y0")
    xi, yi = x.copy(), y.copy()
    eps_arr = np.asarray(sorted(float(e) for e in eps), dtype=float)
    ak, ap, kk, kp, mm, symmetric, nodes = _engine_args(spec, cfg.delta_cut)
    if nodes is None:
        nodes = _coupled_nodes(spec, cfg)
    cap = int(min(cfg.max_events, cfg.log_capacity))
    rec_t = np.empty(cap)
    rec_tag = np.empty(cap, np.int8)
    rec_u = np.empty((cap, 2, d))
    S = np.empty(eps_arr.size)
    acc = np.zeros((2, d))
    # numba boxes uint64 results as Python ints; keep the key unsigned
    key = np.uint64(_engine.path_key(rng.seed_u64, np.uint64(rng.path_offset + path)))
    st, T, ev, cand, mr = _engine.run_coupled(
        ak, ap, kk, kp, x, y, key, float(cfg.t_max), eps_arr, cfg.eta_rel * r0, cfg.kappa,
        cfg.delta_cut, cfg.delta_min, mm.a0, mm.a2, mm.c2, symmetric, cfg.dt, cfg.refresh,
        *nodes, cap, bool(stop_at_coupling), True, rec_t, rec_tag, rec_u, S, acc)
    cp = CoupledPath(xi, yi, cfg.t_max, rec_t[:ev].copy(), rec_tag[:ev].copy(),
                     rec_u[:ev, 0].copy(), rec_u[:ev, 1].copy(), float(T),
                     {float(e): float(s) for e, s in zip(eps_arr, S)}, x, y, acc[0].copy(),
                     acc[1].copy(), cfg.eta_rel * r0, int(cand), float(mr), int(st))
    _raise_status(st, cp)
    return cp


def coupled_outcomes(spec, X0, Y0, cfg, eps=(), rng=None, paths=None, eta_rel=None,
                     stop_at_coupling=True):
    """Coupling and exceedance times for many paths.

    :param stop_at_coupling: stop each path at its coupling time (otherwise run to
        ``cfg.t_max`` with synchronous continuation)
    :returns: dict with ``T`` (P, K), ``S`` (P, K, E), ``distance`` (P, K), ``events`` (P, K),
        the sorted ``eps`` array and terminal states ``X``, ``Y`` (P, K, d)
    """
    d = spec.d
    rng = _rng_of(cfg, rng)
    X0 = np.ascontiguousarray(_as_points(X0, d).reshape(-1, d).astype(float))
    Y0 = np.ascontiguousarray(_as_points(Y0, d).reshape(-1, d).astype(float))
    if X0.shape != Y0.shape:
        raise ValueError("starting pairs must have matching shapes")
    if np.any(np.linalg.norm(X0 - Y0, axis=1) == 0):
        raise ValueError("coupled simulation needs x0 != y0")
    P = cfg.paths if paths is None else int(paths)
    eps_arr = np.asarray(sorted(float(e) for e in eps), dtype=float)
    ak, ap, kk, kp, mm, symmetric, nodes = _engine_args(spec, cfg.delta_cut)
    if nodes is None:
        nodes = _coupled_nodes(spec, cfg)
    T, S, dist, status, events, XT, YT = _engine.coupled_batch(
        ak, ap, kk, kp, X0, Y0, rng.seed_u64, rng.path_indices(P), float(cfg.t_max), eps_arr,
        float(cfg.eta_rel if eta_rel is None else eta_rel), cfg.kappa, cfg.delta_cut,
        cfg.delta_min, mm.a0, mm.a2, mm.c2, symmetric, cfg.dt, cfg.refresh, *nodes,
        int(cfg.max_events), bool(stop_at_coupling))
    _raise_status(status)
    return {"T": T, "S": S, "distance": dist, "events": events, "eps": eps_arr, "X": XT,
            "Y": YT}


TAG_NAMES = {int(t): t.name for t in ComponentTag}
