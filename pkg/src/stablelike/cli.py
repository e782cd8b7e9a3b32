"""
Command line driver for configured experiments.

Every subcommand reads one JSON run configuration (validated against the
schema shipped in ``stablelike/schema``), writes RFC-4180 CSV tables and a
JSON verdict document to the output directory and exits with

    0 pass, 1 verdict failure (or inconclusive), 2 configuration error,
    3 numerical failure, 130 interrupted (tables written so far are kept).

Every CSV row carries the config hash, seed and version string, and floats
are written with their shortest round-trip representation, so reruns of
the same configuration and seed produce identical bytes.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INTERRUPT = 130

VERSION = f"stablelike {__version__}"
COMMANDS = ("verify-assumptions", "verify-drift", "simulate", "couple", "holder-fit",
            "modulus-fit")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def load_schema():
    text = resources.files("stablelike").joinpath("schema/runconfig.schema.json").read_text()
    return json.loads(text)


def validate_config(cfg):
    import jsonschema

    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    d = cfg["model"]["d"]
    for key in ("x", "direction"):
        v = cfg.get("experiment", {}).get(key)
        if v is not None and len(v) != d:
            raise ConfigError(f"experiment.{key} must have length d = {d}")
    for v in cfg.get("experiment", {}).get("x0", []):
        if len(v) != d:
            raise ConfigError(f"experiment.x0 points must have length d = {d}")
    return cfg


def load_config(path, seed=None):
    """Read, validate and (optionally) override the seed of a run configuration."""
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    return validate_config(cfg)


def config_hash(cfg):
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_spec(model):
    from .model import (IndexField, KernelField, MatrixField, OperatorSpec, make_bass_spec,
                        make_sde_spec)

    d = model["d"]
    ix, kn = model["index"], model["kernel"]
    try:
        if ix["kind"] == "constant":
            index = IndexField.constant(d, ix["alpha"])
        elif ix["kind"] == "bump":
            index = IndexField.bump(d, ix["a"], ix["b"])
        else:
            index = IndexField.periodic(d, ix["a"], ix["b"], ix["u"])
        kind = kn["kind"]
        if kind == "bass":
            return make_bass_spec(d, index)
        if kind in ("sde", "sde_diag"):
            if not index.is_constant:
                raise ConfigError("SDE kernels need a constant index")
            A = (MatrixField.constant(kn["matrix"]) if kind == "sde"
                 else MatrixField.diagonal(kn["m"], kn["s"], kn["U"]))
            return make_sde_spec(d, index.alpha_min, A)
        if kind == "constant":
            kernel = KernelField.constant(d, kn["c"])
        elif kind == "skew":
            kernel = KernelField.skew(d, kn["c0"], kn["s"], kn["u"], kn["w"])
        else:
            kernel = KernelField.cosmod(d, kn["c0"], kn["s"], kn["u"], kn["w"])
        return OperatorSpec(d, index, kernel, label=kind)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model block rejected: {exc}") from None


def build_phi(model):
    from .model import ReferenceFunction

    p = model.get("phi")
    if p is None:
        return None
    name = p["name"]
    if name == "loglog":
        return ReferenceFunction.loglog()
    if name == "logpower":
        return ReferenceFunction.logpower(p.get("beta", 1.0))
    if name == "affine":
        return ReferenceFunction.affine(p.get("c", 2.0), p.get("slope", 1.0))
    return ReferenceFunction.constant(p.get("c", 1.0))


def build_scheme(cfg):
    from .quadops.scheme import QuadratureScheme

    try:
        return QuadratureScheme(**cfg.get("quadrature", {}))
    except ValueError as exc:
        raise ConfigError(f"quadrature block rejected: {exc}") from None


def build_simconfig(cfg):
    from .simulate import SimConfig

    try:
        return SimConfig(seed=cfg.get("seed", 0), **cfg.get("simulation", {}))
    except ValueError as exc:
        raise ConfigError(f"simulation block rejected: {exc}") from None


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


class Output:
    """Writes tables and documents tagged with (config hash, seed, version)."""

    def __init__(self, directory, cfg, formats=("csv", "json")):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.hash = config_hash(cfg)
        self.seed = int(cfg.get("seed", 0))
        self.formats = tuple(formats)
        self.written = []

    def csv(self, name, cols, rows):
        if "csv" not in self.formats:
            return None
        path = self.dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(list(cols) + ["config_hash", "seed", "version"])
            for row in rows:
                w.writerow([_cell(v) for v in row] + [self.hash, self.seed, VERSION])
        self.written.append(path)
        return path

    def json(self, name, doc):
        if "json" not in self.formats:
            return None
        path = self.dir / f"{name}.json"
        body = {"config_hash": self.hash, "seed": self.seed, "version": VERSION, **doc}
        path.write_text(json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")
        self.written.append(path)
        return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

INEQUALITY_TOL = 1e-10
DEFAULT_HARD_CURVES = ("H2", "H3_x", "H3_z", "H4")


def cmd_verify_assumptions(cfg, out):
    """Assumption curves, elementary inequalities and the second-difference lemma."""
    from .model import ReferenceFunction
    from .quadops import check_assumptions, lemma33_check, sample_bounds, scalar_inequality_suite

    spec = build_spec(cfg["model"])
    phi = build_phi(cfg["model"])
    ex = cfg.get("experiment", {})
    seed = int(cfg.get("seed", 0)) % (2 ** 32)
    radii = ex.get("radii")
    rep = check_assumptions(spec, phi, radii, ex.get("samples", 64), probes=ex.get("probes", 1000),
                            h4_samples=ex.get("h4_samples", 16), q=build_scheme(cfg), seed=seed)
    out.csv("assumptions", *rep.rows())
    ineq = scalar_inequality_suite(ex.get("inequality_samples", 10 ** 6), seed=seed)
    phis = [phi] if phi is not None and phi.name in ("loglog", "logpower") else \
        [ReferenceFunction.loglog(), ReferenceFunction.logpower(1.0)]
    lemma = {}
    for p in phis:
        v, where = lemma33_check(p, size=ex.get("lemma_grid", 24))
        lemma[p.name] = {"violation": v, "at": list(where)}
    bounds = sample_bounds(spec, seed=seed)
    hard = ex.get("hard_curves", list(DEFAULT_HARD_CURVES))
    failures = [f"curve {k} does not decay" for k in hard if k in rep.verdicts
                and not rep.verdicts[k]]
    failures += [f"declared bound {k} violated by {v:.3g}" for k, v in bounds.items() if v > 0]
    failures += [f"inequality {k} violated by {v:.3g}" for k, v in ineq.items()
                 if v > INEQUALITY_TOL]
    failures += [f"second-difference lemma for {k} violated by {v['violation']:.3g}"
                 for k, v in lemma.items() if v["violation"] > INEQUALITY_TOL]
    out.csv("inequalities", ("name", "max_violation"),
            [(k, v) for k, v in sorted(ineq.items())]
            + [(f"lemma_{k}", v["violation"]) for k, v in sorted(lemma.items())])
    out.json("assumptions", {"command": "verify-assumptions", "report": rep.to_dict(),
                             "inequalities": ineq, "lemma": lemma, "bounds": bounds,
                             "hard_curves": hard, "failures": failures,
                             "verdict": "pass" if not failures else "fail"})
    return EXIT_OK if not failures else EXIT_FAIL


def _r_grid(ex):
    lo, hi = ex.get("r_min", 1e-3), ex.get("r_max", 1e-1)
    if not lo < hi:
        raise ConfigError("experiment.r_min must be smaller than r_max")
    return np.geomspace(lo, hi, ex.get("points", 33))


def _check_beta(spec, beta):
    cap = min(spec.alpha_min, 1.0)
    if not 0.0 < beta < cap:
        raise ConfigError(f"beta = {beta} must lie in (0, alpha0 ^ 1) = (0, {cap:.6g})")


def _drift_report(spec, cfg, kind, beta=None, phi=None):
    from .quadops import build_test_function, default_smoothing_index, drift_profile

    ex = cfg.get("experiment", {})
    r = _r_grid(ex)
    n = ex.get("n", default_smoothing_index(r[0]))
    if kind == "power":
        tf = build_test_function("power", n=n, beta=beta)
    else:
        if phi is None:
            raise ConfigError("modulus drift profiles need model.phi")
        if spec.alpha_min <= 1.0:
            raise ConfigError("modulus drift profiles need alpha0 > 1")
        tf = build_test_function("modulus", n=n, phi=phi)
    return drift_profile(spec, tf, build_scheme(cfg), r_grid=r, center=ex.get("x"),
                         directions=ex.get("directions", 8),
                         seed=int(cfg.get("seed", 0)) % (2 ** 32), probes=ex.get("probes", 1000))


def cmd_verify_drift(cfg, out):
    """Drift profiles of the coupling operator for the requested test-function kinds."""
    spec = build_spec(cfg["model"])
    phi = build_phi(cfg["model"])
    ex = cfg.get("experiment", {})
    kinds = ex.get("kinds", ["power"] + (["modulus"] if phi is not None else []))
    beta = ex.get("beta", 0.5)
    if "power" in kinds:
        _check_beta(spec, beta)
    summary = {}
    ok = True
    for kind in kinds:
        rep = _drift_report(spec, cfg, kind, beta, phi)
        out.csv(f"drift_{kind}", *rep.rows())
        summary[kind] = rep.to_dict()
        ok = ok and rep.passed
        out.json("drift", {"command": "verify-drift", "reports": summary,
                           "verdict": "pass" if ok else "fail"})
    return EXIT_OK if ok else EXIT_FAIL


def _oracle_cos(spec, x0, t, xi):
    """exp(-t |xi|^alpha) cos(xi x_1) for the constant-index Bass operator, else nan."""
    if not (spec.kernel.kind == "bass" and spec.index.is_constant):
        return math.nan
    return math.exp(-t * abs(xi) ** spec.alpha_min) * math.cos(xi * x0[0])


def cmd_simulate(cfg, out):
    """Semigroup estimates E f(X_t) and E cos(xi X_t^1) at the configured starting points."""
    from .fields import bounded_function
    from .simulate import marginal_terminal, simulate_marginal, write_event_log

    spec = build_spec(cfg["model"])
    sim = build_simconfig(cfg)
    ex = cfg.get("experiment", {})
    d = spec.d
    t = float(ex.get("t", sim.t_max))
    sim = sim.replace(t_max=t)
    f = bounded_function(ex.get("f", "clipped-sin"), d)
    xis = ex.get("xi", [1.0])
    X0 = np.array(ex.get("x0", [[0.0] * d]), dtype=float)
    cols = ("point",) + tuple(f"x0_{i + 1}" for i in range(d)) + (
        "t", "statistic", "estimate", "se", "oracle", "within_tolerance")
    rows = []
    ok = True
    for k, x0 in enumerate(X0):
        X = marginal_terminal(spec, x0[None, :], sim)[:, 0, :]
        P = X.shape[0]
        stats = [(ex.get("f", "clipped-sin"), np.asarray(f(X), float), math.nan)]
        for xi in xis:
            stats.append((f"cos[{xi!r}]", np.cos(xi * X[:, 0]), _oracle_cos(spec, x0, t, xi)))
        for name, v, oracle in stats:
            mean = float(v.mean())
            se = float(v.std(ddof=1) / math.sqrt(P)) if P > 1 else 0.0
            within = True if math.isnan(oracle) else abs(mean - oracle) <= 3 * se + 2e-2
            ok = ok and within
            rows.append((k,) + tuple(float(c) for c in x0) + (t, name, mean, se, oracle, within))
        out.csv("simulate", cols, rows)
    doc = {"command": "simulate", "t": t, "paths": sim.paths, "delta_cut": sim.delta_cut,
           "verdict": "pass" if ok else "fail"}
    if ex.get("event_log", False):
        p = simulate_marginal(spec, X0[0], sim)
        path, _ = write_event_log(out.dir / "marginal_path0.bin", p, out.hash, VERSION)
        doc["event_log"] = path.name
        doc["replay_error"] = p.replay_error
    out.json("simulate", doc)
    return EXIT_OK if ok else EXIT_FAIL


def _pairs(spec, ex, eps):
    d = spec.d
    x = np.array(ex.get("x", [0.0] * d), dtype=float)
    v = np.array(ex.get("direction", [1.0] + [0.0] * (d - 1)), dtype=float)
    v = v / np.linalg.norm(v)
    dist = np.array(ex.get("distances", [eps / 2, eps / 4, eps / 8]), dtype=float)
    return x, v, dist, [(x, x + r * v) for r in dist]


def cmd_couple(cfg, out):
    """Coupling-time tails against the bounds of the coupling argument."""
    from .analyze import tail_consistency
    from .simulate import estimate_coupling_tail, simulate_coupled, write_event_log

    spec = build_spec(cfg["model"])
    sim = build_simconfig(cfg)
    ex = cfg.get("experiment", {})
    eps = ex.get("eps", 0.2)
    beta = ex.get("beta", 0.5)
    _check_beta(spec, beta)
    t_grid = np.array(ex.get("t_grid", [0.5, 1.0, 2.0]), dtype=float)
    sim = sim.replace(t_max=max(sim.t_max, float(t_grid.max())))
    x, v, dist, pairs = _pairs(spec, ex, eps)
    if np.any(dist >= eps):
        raise ConfigError("pair distances must be smaller than eps")
    C0 = ex.get("C0")
    drift_doc = None
    if C0 is None:
        rep = _drift_report(spec, cfg, "power", beta)
        C0 = rep.C0
        drift_doc = {"eps0": rep.eps0, "C0": rep.C0, "passed": rep.passed}
    tail = estimate_coupling_tail(spec, pairs, t_grid, eps, sim)
    out.csv("coupling_tail", *tail.rows())
    rep = tail_consistency(tail, beta, C0, spec.alpha_min, slack=ex.get("tail_slack", 0.25))
    out.csv("coupling_bounds", *rep.rows())
    bins = ex.get("histogram_bins", 20)
    edges = np.linspace(0.0, sim.t_max, bins + 1)
    hist_rows = []
    for i, r in enumerate(dist):
        T = tail.T[:, i]
        counts, _ = np.histogram(T[np.isfinite(T)], bins=edges)
        hist_rows += [(float(r), float(a), float(b), int(c))
                      for a, b, c in zip(edges[:-1], edges[1:], counts)]
        hist_rows.append((float(r), float(sim.t_max), math.inf, int(np.count_nonzero(~np.isfinite(T)))))
    out.csv("coupling_time_histogram", ("r", "bin_lo", "bin_hi", "count"), hist_rows)
    doc = {"command": "couple", "eps": eps, "beta": beta, "C0": C0, "drift": drift_doc,
           "eta_rel": sim.eta_rel, "eta_shift": tail.eta_shift,
           "eta_shift_se": tail.eta_shift_se, "report": {
               k: val for k, val in rep.to_dict().items()}, "verdict":
           "pass" if rep.passed else "fail"}
    if ex.get("event_log", False):
        p = simulate_coupled(spec, pairs[0][0], pairs[0][1], sim, eps=[eps])
        path, _ = write_event_log(out.dir / "coupled_path0.bin", p, out.hash, VERSION)
        doc["event_log"] = path.name
    out.json("couple", doc)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _fit_inputs(cfg):
    from .fields import bounded_function

    spec = build_spec(cfg["model"])
    sim = build_simconfig(cfg)
    ex = cfg.get("experiment", {})
    d = spec.d
    f = bounded_function(ex.get("f", "clipped-sin"), d)
    x = ex.get("x", [0.0] * d)
    v = ex.get("direction", [1.0] + [0.0] * (d - 1))
    t = float(ex.get("t", 0.5))
    t_grid = [t] + [s for s in ex.get("t_grid", []) if s != t]
    return spec, sim, ex, f, x, v, t_grid


def cmd_holder_fit(cfg, out):
    """Holder exponent of x -> P_t f(x) from common-random-number differences."""
    from .analyze import holder_fit, holder_rate

    spec, sim, ex, f, x, v, t_grid = _fit_inputs(cfg)
    beta = ex.get("beta", 0.5)
    _check_beta(spec, beta)
    fits = []
    rows = []
    for t in t_grid:
        fit = holder_fit(spec, f, x, v, t, beta, sim.replace(t_max=t), r0=ex.get("r0", 0.1),
                         K=ex.get("K", 5))
        fits.append(fit)
        cols, r = fit.rows()
        rows += r
        out.csv("holder", cols, rows)
    main = fits[0]
    doc = {"command": "holder-fit", "fits": [fi.to_dict() for fi in fits],
           "verdict": main.verdict}
    if len(fits) > 1:
        doc["rate"] = holder_rate(fits, beta, spec.alpha_min)
    out.json("holder", doc)
    return EXIT_OK if main.passed else EXIT_FAIL


def cmd_modulus_fit(cfg, out):
    """Differences normalised by the modulus int_0^r phi, with envelopes and closed-form rates."""
    from .analyze import example16_rate, modulus_envelope, modulus_fit

    spec, sim, ex, f, x, v, t_grid = _fit_inputs(cfg)
    phi = build_phi(cfg["model"])
    if phi is None:
        raise ConfigError("modulus-fit needs model.phi")
    if spec.alpha_min <= 1.0:
        raise ConfigError("modulus-fit needs alpha0 > 1")
    eps0 = ex.get("eps0")
    drift_doc = None
    if eps0 is None:
        rep = _drift_report(spec, cfg, "modulus", phi=phi)
        eps0 = rep.eps0
        drift_doc = {"eps0": rep.eps0, "C0": rep.C0, "passed": rep.passed}
        if eps0 <= 0:
            out.json("modulus", {"command": "modulus-fit", "drift": drift_doc,
                                 "verdict": "fail", "reason": "no negative drift radius"})
            return EXIT_FAIL
    fits = []
    rows = []
    for t in t_grid:
        fit = modulus_fit(spec, f, x, v, t, phi, sim.replace(t_max=t), r0=ex.get("r0", 0.1),
                          K=ex.get("K", 5), eps0=eps0)
        fits.append(fit)
        cols, r = fit.rows()
        rows += r
        out.csv("modulus", cols, rows)
    tt = np.array(t_grid)
    env, _ = modulus_envelope(phi, tt, spec.alpha_min, eps0)
    env_half, _ = modulus_envelope(phi, tt, spec.alpha_min, 0.5 * eps0)
    try:
        closed = example16_rate(phi.name, tt, spec.alpha_min, phi.params.get("beta", 1.0))
    except ValueError:
        closed = np.full(tt.size, math.nan)
    out.csv("modulus_rate", ("t", "envelope", "envelope_half_eps0", "closed_form", "ratio"),
            [(float(a), float(b), float(c), float(e), float(b / e)) for a, b, c, e in
             zip(tt, env, env_half, closed)])
    main = fits[0]
    out.json("modulus", {"command": "modulus-fit", "eps0": eps0, "drift": drift_doc,
                         "fits": [fi.to_dict() for fi in fits], "verdict": main.verdict})
    return EXIT_OK if main.passed else EXIT_FAIL


HANDLERS = {
    "verify-assumptions": cmd_verify_assumptions,
    "verify-drift": cmd_verify_drift,
    "simulate": cmd_simulate,
    "couple": cmd_couple,
    "holder-fit": cmd_holder_fit,
    "modulus-fit": cmd_modulus_fit,
}


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="stablelike", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=VERSION)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=HANDLERS[name].__doc__.strip().splitlines()[0])
        s.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
        s.add_argument("--seed", type=_seed, metavar="U64", help="override the config seed")
        s.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
        s.add_argument("--threads", type=int, metavar="N", help="worker threads for path batches")
    return p


def run(command, cfg, out_dir=None, threads=None):
    """Run a subcommand on a validated config; returns the exit code."""
    from .quadops import DriftError, QuadratureError, TestFunctionError
    from .simulate import SimulationError

    if threads is not None:
        import numba

        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    oc = cfg.get("output", {})
    out = Output(out_dir or oc.get("directory", "out"), cfg, oc.get("formats", ("csv", "json")))
    try:
        return HANDLERS[command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, DriftError, SimulationError, TestFunctionError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except KeyboardInterrupt:
        print(f"interrupted; partial tables kept in {out.dir}", file=sys.stderr)
        return EXIT_INTERRUPT


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.command, cfg, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
