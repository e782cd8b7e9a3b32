"""
Acceptance criteria 1-10 at their pinned tolerances.

Each test records one PASS/FAIL line (shown in the terminal summary) and then
asserts the same verdict.  Criteria 6-9 are long Monte Carlo runs; the whole
module takes roughly half an hour on one core.
"""

import copy
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from stablelike import cli
from stablelike.fields import ClippedSin, CompactBump, Cosine, SumField
from stablelike.geometry import CoupledKernel, reflect
from stablelike.model import IndexField, ReferenceFunction, make_bass_spec, make_constant_spec
from stablelike.quadops import (QuadratureScheme, apply_coupling_operator, apply_generator,
                                build_test_function, default_smoothing_index, drift_profile,
                                lemma33_check, scalar_inequality_suite)
from stablelike.analyze import holder_fit
from stablelike.simulate import SimConfig, marginal_terminal

from conftest import presets, record

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
Q = QuadratureScheme(tol_abs=1e-7, tol_rel=1e-6)


def load(name, **sections):
    cfg = json.loads((CONFIGS / name).read_text())
    for k, v in sections.items():
        cfg[k] = dict(cfg.get(k, {}), **v)
    cli.validate_config(cfg)
    return cfg


# 1 ---------------------------------------------------------------------------

def test_criterion_01_reflection_suite():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = {"involution": 0.0, "norm": 0.0, "parallel": 0.0, "orthogonal": 0.0}
    for d in (1, 2, 3):
        n = 100_000
        x = rng.normal(size=(n, d)) * np.exp(rng.uniform(-3, 3, (n, 1)))
        y = x + rng.normal(size=(n, d)) * np.exp(rng.uniform(-3, 3, (n, 1)))
        z = rng.normal(size=(n, d)) * np.exp(rng.uniform(-3, 3, (n, 1)))
        p = reflect(x, y, z)
        nz = np.linalg.norm(z, axis=1)
        v = x - y
        u = v / np.linalg.norm(v, axis=1, keepdims=True)
        worst["involution"] = max(worst["involution"],
                                  float(np.max(np.linalg.norm(reflect(x, y, p) - z, axis=1) / nz)))
        worst["norm"] = max(worst["norm"], float(np.max(np.abs(np.linalg.norm(p, axis=1) - nz) / nz)))
        a, b = z - p, z + p
        # z - phi(z) is parallel to x - y: its component orthogonal to u vanishes
        par = a - np.sum(a * u, axis=1, keepdims=True) * u
        worst["parallel"] = max(worst["parallel"], float(np.max(np.linalg.norm(par, axis=1) / nz)))
        worst["orthogonal"] = max(worst["orthogonal"], float(np.max(np.abs(np.sum(b * u, axis=1))
                                                                    / nz)))
    elapsed = time.perf_counter() - start
    ok = (worst["involution"] <= 1e-14 and worst["norm"] <= 1e-14 and worst["parallel"] <= 1e-12
          and worst["orthogonal"] <= 1e-12 and elapsed < 5)
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    assert record(1, ok, f"reflection suite: {detail}; {elapsed:.1f} s")


# 2 ---------------------------------------------------------------------------

def test_criterion_02_eigenrelation():
    rng = np.random.default_rng(102)
    start = time.perf_counter()
    worst = 0.0
    for alpha in (0.5, 1.0, 1.5):
        for d in (1, 2):
            spec = make_bass_spec(d, IndexField.constant(d, alpha))
            for k in (0.5, 1.0, 2.0):
                u = rng.normal(size=d)
                xi = k * u / np.linalg.norm(u)
                f = Cosine(xi)
                for _ in range(5):
                    x = rng.uniform(-2, 2, d)
                    exact = -k ** alpha * math.cos(float(xi @ x))
                    got = apply_generator(spec, f, x)
                    worst = max(worst, abs(got - exact) / abs(exact))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 60
    assert record(2, ok, f"eigenrelation: max relative error {worst:.2e}; {elapsed:.1f} s")


# 3 ---------------------------------------------------------------------------

def test_criterion_03_coupling_consistency():
    rng = np.random.default_rng(103)
    start = time.perf_counter()
    d = 2
    g = CompactBump([0.1, -0.2], 1.0, 1.0)
    h = CompactBump([-0.1, 0.1], 0.8, 0.5)
    F = SumField(g, h)
    worst = -math.inf
    for spec in presets(d).values():
        for _ in range(20):
            x = rng.normal(size=d) * 0.4
            y = x + rng.normal(size=d) * 0.3
            lt = apply_coupling_operator(CoupledKernel(spec, x, y), F, Q)
            lg = apply_generator(spec, g, x, Q)
            lh = apply_generator(spec, h, y, Q)
            tol = 2 * (Q.tol_abs + Q.tol_rel * (abs(lg) + abs(lh)))
            worst = max(worst, abs(lt - lg - lh) / tol)
    elapsed = time.perf_counter() - start
    ok = worst <= 1.0 and elapsed < 120
    assert record(3, ok, f"coupling consistency: max residual / tolerance {worst:.3f} over "
                         f"60 pairs; {elapsed:.1f} s")


# 4 ---------------------------------------------------------------------------

def test_criterion_04_inequalities():
    start = time.perf_counter()
    ineq = scalar_inequality_suite(n=1_000_000, seed=104)
    lemma = {phi.name: lemma33_check(phi)[0]
             for phi in (ReferenceFunction.loglog(), ReferenceFunction.logpower(1.0))}
    elapsed = time.perf_counter() - start
    worst = max(max(ineq.values()), max(lemma.values()))
    ok = worst <= 1e-10 and elapsed < 30
    detail = ", ".join(f"{k} {v:.2e}" for k, v in list(ineq.items()) + list(lemma.items()))
    assert record(4, ok, f"inequalities: {detail}; {elapsed:.1f} s")


# 5 ---------------------------------------------------------------------------

def test_criterion_05_drift_negativity():
    start = time.perf_counter()
    spec = make_constant_spec(1, 1.5, 1.0)
    n = default_smoothing_index(1e-3)
    power = drift_profile(spec, build_test_function("power", n=n, beta=0.5), Q)
    phi = ReferenceFunction.logpower(1.0)
    modulus = drift_profile(spec, build_test_function("modulus", n=n, phi=phi), Q)
    elapsed = time.perf_counter() - start
    ok_power = power.flags["all_negative"] and abs(power.slope - (0.5 - 1.5)) <= 0.15
    ok_mod = modulus.C0 > 0 and modulus.flags["pointwise_bound"]
    ok = ok_power and ok_mod and elapsed < 600
    assert record(5, ok, f"drift: power all negative {power.flags['all_negative']}, slope "
                         f"{power.slope:.3f}; modulus C0 {modulus.C0:.3g}, bound holds "
                         f"{modulus.flags['pointwise_bound']}; {elapsed:.0f} s")


# 6 ---------------------------------------------------------------------------

def test_criterion_06_marginal_law():
    start = time.perf_counter()
    spec = make_bass_spec(1, IndexField.constant(1, 1.2))
    cfg = SimConfig(t_max=1.0, paths=100_000, delta_cut=1e-4, seed=3)
    means = {}
    for delta in (1e-4, 1e-3):
        X = marginal_terminal(spec, np.zeros((1, 1)), cfg.replace(delta_cut=delta))[:, 0, 0]
        c = np.cos(X)
        means[delta] = (float(c.mean()), float(c.std(ddof=1) / math.sqrt(c.size)))
    elapsed = time.perf_counter() - start
    m, se = means[1e-4]
    err = abs(m - math.exp(-1.0))
    shift = abs(means[1e-3][0] - m)
    ok = err <= 3 * se + 2e-2 and shift <= 1e-2 and elapsed < 600
    assert record(6, ok, f"marginal law: |mean - e^-1| {err:.2e} (3 se {3 * se:.1e}), "
                         f"cutoff shift {shift:.2e}; {elapsed:.0f} s")


# 7 ---------------------------------------------------------------------------

def test_criterion_07_coupling_tail(tmp_path):
    start = time.perf_counter()
    cfg = load("bass_const_15.json")
    code = cli.run("couple", cfg, tmp_path)
    doc = json.loads((tmp_path / "couple.json").read_text())
    rep = doc["report"]
    elapsed = time.perf_counter() - start
    exceed_ok = bool(np.all(np.asarray(rep["exceed_margin"]) >= 0))
    tail_ok = bool(np.all(np.asarray(rep["tail_margin"]) >= 0))
    ok = (code == cli.EXIT_OK and exceed_ok and tail_ok and rep["tail_monotone"]
          and doc["C0"] > 0 and elapsed < 1200)
    assert record(7, ok, f"coupling tail: C0 {doc['C0']:.3g}, exceedance margins "
                         f"{np.round(rep['exceed_margin'], 4).tolist()}, min tail margin "
                         f"{np.min(rep['tail_margin']):.4f}, monotone {rep['tail_monotone']}, "
                         f"eta/10 shift {np.round(doc['eta_shift'], 4).tolist()}; "
                         f"{elapsed:.0f} s")


# 8 ---------------------------------------------------------------------------

def test_criterion_08_holder_exponent():
    start = time.perf_counter()
    spec = make_bass_spec(1, IndexField.constant(1, 1.5))
    cfg = SimConfig(t_max=0.5, paths=100_000, delta_cut=1e-3, seed=7)
    fit = holder_fit(spec, ClippedSin(1), [0.3], [1.0], 0.5, 0.5, cfg, r0=0.1, K=5)
    elapsed = time.perf_counter() - start
    lo = fit.slope_ci[0]
    ok = lo >= 0.45 and elapsed < 1800
    assert record(8, ok, f"holder exponent: slope {fit.slope:.3f}, CI lower {lo:.3f}; "
                         f"{elapsed:.0f} s")


# 9 ---------------------------------------------------------------------------

def test_criterion_09_variable_order(tmp_path):
    start = time.perf_counter()
    cfg = load("bass_bump.json")
    codes = {c: cli.run(c, cfg, tmp_path / c)
             for c in ("verify-assumptions", "verify-drift", "holder-fit")}
    assumptions = json.loads((tmp_path / "verify-assumptions" / "assumptions.json").read_text())
    drift = json.loads((tmp_path / "verify-drift" / "drift.json").read_text())
    holder = json.loads((tmp_path / "holder-fit" / "holder.json").read_text())
    eps0 = drift["reports"]["power"]["eps0"]
    lo = holder["fits"][0]["slope_ci"][0]
    elapsed = time.perf_counter() - start
    ok = (all(c == cli.EXIT_OK for c in codes.values()) and assumptions["verdict"] == "pass"
          and eps0 > 0 and lo >= 0.45 and elapsed < 2700)
    assert record(9, ok, f"variable order: exit codes {list(codes.values())}, assumptions "
                         f"{assumptions['verdict']}, eps0 {eps0:.3g}, holder CI lower "
                         f"{lo:.3f}; {elapsed:.0f} s")


# 10 --------------------------------------------------------------------------

QUICK = {
    "verify-assumptions": {"samples": 8, "probes": 100, "h4_samples": 2,
                           "inequality_samples": 20000, "lemma_grid": 6},
    "verify-drift": {"r_min": 1e-2, "r_max": 1e-1, "points": 5, "probes": 100},
    "simulate": {"x0": [[0.0], [0.5]], "t": 0.5, "xi": [1.0], "event_log": True},
    "couple": {"eps": 0.2, "t_grid": [0.25, 0.5], "C0": 0.4, "event_log": True},
    "holder-fit": {"t": 0.5, "t_grid": [0.5, 1.0], "x": [0.3]},
    "modulus-fit": {"t": 0.5, "x": [0.3], "eps0": 0.1},
}


def test_criterion_10_determinism(tmp_path):
    base = load("bass_const_15.json")
    base["simulation"] = {"t_max": 0.5, "paths": 300, "delta_cut": 1e-2}
    differing = []
    for command, ex in QUICK.items():
        cfg = copy.deepcopy(base)
        cfg["experiment"] = dict(ex)
        cli.validate_config(cfg)
        a, b = tmp_path / command / "a", tmp_path / command / "b"
        cli.run(command, cfg, a)
        cli.run(command, copy.deepcopy(cfg), b)
        names = sorted(p.name for p in a.glob("*.csv"))
        if not names or names != sorted(p.name for p in b.glob("*.csv")):
            differing.append(command)
            continue
        differing += [f"{command}/{n}" for n in names
                      if (a / n).read_bytes() != (b / n).read_bytes()]
    ok = not differing
    assert record(10, ok, f"determinism: {len(QUICK)} commands rerun, differing CSVs "
                          f"{differing or 'none'}")
