import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from stablelike.fields import Constant, Cosine
from stablelike.geometry import ComponentTag
from stablelike.model import IndexField, KernelField, OperatorSpec, make_bass_spec, make_constant_spec
from stablelike.simulate import (CounterRNG, SimConfig, check_domination, coupled_outcomes,
                                 estimate_coupling_tail, estimate_semigroup, majorant,
                                 marginal_terminal, read_event_log, sample_dominating_jump,
                                 simulate_coupled, simulate_marginal, write_event_log)
from stablelike.simulate.dominating import Majorant, radius_cdf, radius_quantile

from conftest import presets

T = ComponentTag
SKEW = OperatorSpec(1, IndexField.bump(1, 1.3, 0.2), KernelField.skew(1, 1.0, 0.5, [1.0], [2.0]))


# ---------------------------------------------------------------------------
# dominating measure
# ---------------------------------------------------------------------------

def test_radius_cdf_at_one_is_inner_fraction():
    m = Majorant(2, 1.3, 0.8, 1.6, 1e-3)
    assert float(radius_cdf(m, 1.0)) == pytest.approx(m.inner_mass / m.total_mass, rel=1e-14)


def test_inner_median_oracle():
    delta = 0.01
    m = Majorant(1, 1.0, 1.0, 1.0, delta)
    # inner CDF is proportional to 1/delta - 1/r; its median solves 1/r = (1/delta + 1)/2
    median = 2.0 / (1.0 / delta + 1.0)
    assert median == pytest.approx(0.02 / 1.01, rel=1e-15)
    p_in = m.inner_mass / m.total_mass
    assert float(radius_quantile(m, 0.5 * p_in)) == pytest.approx(median, rel=1e-12)


@given(st.floats(1e-9, 1 - 1e-9))
def test_quantile_inverts_cdf(u):
    m = Majorant(3, 0.5, 0.7, 1.9, 1e-4)
    assert float(radius_cdf(m, radius_quantile(m, u))) == pytest.approx(u, rel=1e-9, abs=1e-12)


def test_radial_histogram_chi2():
    spec = OperatorSpec(2, IndexField.bump(2, 1.2, 0.5), KernelField.constant(2, 1.0))
    delta = 1e-2
    Z, G = sample_dominating_jump(CounterRNG(99), spec, delta, count=1_000_000)
    rho = np.linalg.norm(Z, axis=1)
    a0, a2, c2 = 1.2, 1.7, 1.0
    om = 2 * math.pi
    # exact bin masses of c2 |z|^{-d-a} written out directly in polar coordinates
    mass = lambda a, lo, hi: om * c2 * (lo ** -a - hi ** -a) / a
    edges = np.r_[np.geomspace(delta, 1.0, 21), np.geomspace(1.0, 1e3, 11)[1:], np.inf]
    probs = np.array([mass(a2 if hi <= 1 else a0, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])])
    probs /= probs.sum()
    counts, _ = np.histogram(rho, bins=edges)
    chi2, p = stats.chisquare(counts, probs * rho.size)
    assert p > 0.01
    # the returned density is the dominating density at z
    np.testing.assert_allclose(G, c2 * rho ** np.where(rho <= 1, -(2 + a2), -(2 + a0)), rtol=1e-12)


@pytest.mark.parametrize("name", ["constant", "bass_bump", "sde"])
@pytest.mark.parametrize("d", [1, 2])
def test_domination_spot_check(name, d):
    assert check_domination(presets(d)[name], 1e-4, states=10_000) <= 1.0 + 1e-12
    assert check_domination(SKEW, 1e-4, states=10_000) <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# marginal paths
# ---------------------------------------------------------------------------

def test_zero_horizon():
    p = simulate_marginal(presets(1)["bass_bump"], [0.3], SimConfig(t_max=0.0))
    assert p.times.size == 0 and p.terminal[0] == 0.3 and p.candidates == 0


def test_symmetric_kernel_has_no_drift():
    p = simulate_marginal(presets(2)["bass_bump"], [0.1, 0.2], SimConfig(t_max=0.3, delta_cut=1e-3))
    assert not p.drift_total.any()
    assert p.max_ratio <= 1.0


def test_skew_kernel_replay():
    cfg = SimConfig(t_max=0.5, delta_cut=1e-3, seed=5)
    p = simulate_marginal(SKEW, [0.2], cfg)
    assert p.drift_steps > 0 and np.any(p.drift_total != 0)
    assert p.replay_error <= 1e-12 * (1 + np.abs(p.terminal).max())
    assert 0 < p.max_ratio <= 1.0


def test_single_path_matches_batch():
    # regression: the path key must stay unsigned on its way back from compiled code
    cfg = SimConfig(t_max=1.0, delta_cut=1e-3, seed=4, paths=10)
    spec = make_constant_spec(1, 1.5, 1.0)
    batch = marginal_terminal(spec, [[0.0]], cfg)
    o = coupled_outcomes(spec, [[0.0]], [[0.05]], cfg, eps=[0.2], stop_at_coupling=False)
    for p in range(10):
        assert simulate_marginal(spec, [0.0], cfg, path=p).terminal[0] == batch[p, 0, 0]
        cp = simulate_coupled(spec, [0.0], [0.05], cfg, eps=[0.2], path=p)
        assert cp.T == o["T"][p, 0] and cp.terminal_x[0] == o["X"][p, 0, 0]


def test_skew_single_path_matches_batch():
    cfg = SimConfig(t_max=0.3, delta_cut=1e-3, seed=8, paths=4)
    batch = marginal_terminal(SKEW, [[0.2]], cfg)
    for p in range(4):
        assert simulate_marginal(SKEW, [0.2], cfg, path=p).terminal[0] == pytest.approx(
            batch[p, 0, 0], abs=1e-12)


def test_replay_determinism_is_byte_identical(tmp_path):
    cfg = SimConfig(t_max=0.5, delta_cut=1e-3, seed=17)
    a = simulate_coupled(SKEW, [0.0], [0.05], cfg, eps=[0.1])
    b = simulate_coupled(SKEW, [0.0], [0.05], cfg, eps=[0.1])
    pa, _ = write_event_log(tmp_path / "a.bin", a, "h")
    pb, _ = write_event_log(tmp_path / "b.bin", b, "h")
    assert pa.read_bytes() == pb.read_bytes()
    assert (tmp_path / "a.bin.json").read_text() == (tmp_path / "b.bin.json").read_text()


def test_streams_independent_of_batch_layout():
    spec = presets(1)["bass_bump"]
    cfg = SimConfig(t_max=0.2, delta_cut=1e-3, seed=3)
    full = marginal_terminal(spec, [[0.0]], cfg, paths=8)
    tail = marginal_terminal(spec, [[0.0]], cfg, rng=CounterRNG(3, 4), paths=4)
    np.testing.assert_array_equal(full[4:], tail)


def test_event_log_roundtrip(tmp_path):
    cfg = SimConfig(t_max=0.3, delta_cut=1e-3, seed=2)
    mp = simulate_marginal(SKEW, [0.1], cfg)
    path, side = write_event_log(tmp_path / "m.bin", mp, "abc", "v")
    rec, meta = read_event_log(path)
    assert rec.dtype.itemsize == 9 + 16 * 1
    assert path.stat().st_size == rec.size * rec.dtype.itemsize
    np.testing.assert_array_equal(rec["t"], mp.times)
    np.testing.assert_array_equal(rec["ux"], mp.jumps)
    assert np.all(rec["tag"] == 255) and meta["config_hash"] == "abc"
    cp = simulate_coupled(presets(2)["constant"], [0.0, 0.0], [0.05, 0.0], cfg, eps=[0.2])
    path, _ = write_event_log(tmp_path / "c.bin", cp)
    rec, meta = read_event_log(path)
    np.testing.assert_array_equal(rec["tag"], cp.tags)
    np.testing.assert_array_equal(rec["uy"], cp.uy)
    assert meta["kind"] == "coupled" and rec.dtype.itemsize == 9 + 32


def test_truncation_error_keeps_partial_path():
    from stablelike.simulate import TruncationError
    with pytest.raises(TruncationError) as exc:
        simulate_marginal(make_constant_spec(1, 1.5, 1.0), [0.0],
                          SimConfig(t_max=1.0, delta_cut=1e-3, max_events=10))
    assert exc.value.partial is not None and exc.value.partial.times.size == 10


def test_simconfig_validation():
    with pytest.raises(ValueError):
        SimConfig(delta_cut=1.5)
    with pytest.raises(ValueError):
        SimConfig(paths=0)
    assert SimConfig().replace(paths=5).paths == 5


# ---------------------------------------------------------------------------
# coupled paths
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def coupled_constant():
    spec = make_constant_spec(2, 1.5, 1.0)
    cfg = SimConfig(t_max=0.5, delta_cut=1e-3, seed=21)
    return [simulate_coupled(spec, [0.0, 0.0], [0.04, 0.03], cfg, eps=[0.1, 0.2], path=p)
            for p in range(6)]


def test_post_coupling_synchronous(coupled_constant):
    seen = 0
    for cp in coupled_constant:
        if not cp.coupled:
            continue
        seen += 1
        after = cp.times > cp.T
        assert np.all(cp.tags[after] == T.SYNC)
        assert np.array_equal(cp.ux[after], cp.uy[after])
        x, y = cp.replay()
        assert np.array_equal(x, y)
        assert np.array_equal(cp.terminal_x, cp.terminal_y)
    assert seen > 0


def test_event_distance_geometry(coupled_constant):
    for cp in coupled_constant:
        before = cp.times <= cp.T
        D = cp.x0 - cp.y0 + np.r_[np.zeros((1, 2)), np.cumsum(cp.ux - cp.uy, axis=0)]
        for i in np.flatnonzero(before):
            prev, new = D[i], D[i + 1]
            r = np.linalg.norm(prev)
            tag = T(cp.tags[i])
            z = cp.ux[i] if tag != T.REFLECT_YX else cp.uy[i]
            if tag == T.SYNC:
                assert np.array_equal(cp.ux[i], cp.uy[i])
                assert np.linalg.norm(new) == pytest.approx(r, rel=1e-12)
            elif tag in (T.REFLECT_XY, T.REFLECT_YX):
                v = prev / r
                sign = 1.0 if tag == T.REFLECT_XY else -1.0
                expect = np.linalg.norm(prev + sign * 2.0 * (v @ z) * v)
                assert np.linalg.norm(new) == pytest.approx(expect, rel=1e-9, abs=1e-15)
                assert np.linalg.norm(z) <= r / 2 * (1 + 1e-12)
            if tag.small:
                u = cp.ux[i] if np.any(cp.ux[i]) else cp.uy[i]
                assert abs(np.linalg.norm(new) - r) <= 2 * np.linalg.norm(u) * (1 + 1e-12)


def test_exceedance_times_consistent(coupled_constant):
    for cp in coupled_constant:
        d = np.r_[np.linalg.norm(cp.x0 - cp.y0), cp.distances()]
        for eps, s in cp.S.items():
            if math.isfinite(s):
                k = np.searchsorted(cp.times, s)
                assert cp.times[k] == s and d[k + 1] > eps
                assert np.all(d[:k + 1] <= eps)
        o = cp.outcome()
        assert o.events == cp.times.size
        assert all(o.hit[e] == (s < cp.T) for e, s in cp.S.items())


def test_single_pair_single_path_outcome():
    spec = presets(1)["bass_bump"]
    tail = estimate_coupling_tail(spec, [([0.0], [0.02])], [0.1, 0.2], 0.1,
                                  SimConfig(t_max=0.2, delta_cut=1e-3, paths=1), sensitivity=False)
    assert tail.paths == 1
    Tv, Sv = tail.T[0, 0], tail.S[0, 0]
    assert tail.p_exceed[0] == float(Sv < Tv)
    assert tail.p_tail[0, 0] == float(Tv >= 0.1)
    assert 0.0 <= tail.mean_stop[0] <= 0.2


def test_coupled_marginal_law_matches_marginal():
    # two-sample z test on E cos(X_t): the x-marginal of the coupling has the marginal law
    spec = make_bass_spec(1, IndexField.constant(1, 1.2))
    N = 100_000
    cfg = SimConfig(t_max=0.5, delta_cut=1e-3, seed=31, paths=N)
    o = coupled_outcomes(spec, [[0.0]], [[0.1]], cfg, eps=[], stop_at_coupling=False)
    a = np.cos(o["X"][:, 0, 0])
    b = np.cos(marginal_terminal(spec, [[0.0]], cfg.replace(seed=32))[:, 0, 0])
    z = (a.mean() - b.mean()) / math.sqrt(a.var(ddof=1) / N + b.var(ddof=1) / N)
    assert abs(z) < stats.norm.ppf(0.995)
    ay = np.cos(o["Y"][:, 0, 0] - 0.1)
    z = (ay.mean() - b.mean()) / math.sqrt(ay.var(ddof=1) / N + b.var(ddof=1) / N)
    assert abs(z) < stats.norm.ppf(0.995)


def test_coupled_requires_distinct_points():
    with pytest.raises(ValueError):
        simulate_coupled(presets(1)["constant"], [0.1], [0.1], SimConfig())


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def test_semigroup_constant_function():
    m, se = estimate_semigroup(presets(1)["bass_bump"], Constant(1, 0.7), [0.0], 0.3,
                               SimConfig(delta_cut=1e-3, paths=200))
    assert m == 0.7 and se == 0.0


@settings(max_examples=10)
@given(st.integers(0, 2 ** 64 - 1))
def test_semigroup_estimate_bounded(seed):
    m, se = estimate_semigroup(presets(1)["bass_bump"], Cosine([3.0]), [0.0], 0.2,
                               SimConfig(delta_cut=1e-2, paths=50, seed=seed))
    assert abs(m) <= 1.0 and se >= 0


def test_semigroup_eigen_oracle():
    spec = make_bass_spec(1, IndexField.constant(1, 1.5))
    m, se = estimate_semigroup(spec, Cosine([1.0]), [0.0], 1.0,
                               SimConfig(delta_cut=1e-3, paths=20_000, seed=6))
    assert abs(m - math.exp(-1.0)) <= 3 * se + 2e-2


def test_coupling_tail_shrinks_with_r():
    spec = make_constant_spec(1, 1.5, 1.0)
    tail = estimate_coupling_tail(spec, [([0.0], [0.1]), ([0.0], [0.0125])], [0.5], 0.2,
                                  SimConfig(t_max=0.5, delta_cut=1e-3, paths=2000, seed=9))
    assert tail.p_exceed[1] < tail.p_exceed[0]
    assert np.all(np.abs(tail.eta_shift) <= 3 * tail.eta_shift_se + 1e-3)


def test_coupling_tail_validation():
    spec = presets(1)["constant"]
    with pytest.raises(ValueError):
        estimate_coupling_tail(spec, [([0.0], [0.3])], [0.1], 0.2, SimConfig(paths=2))
    with pytest.raises(ValueError):
        estimate_coupling_tail(spec, [([0.0], [0.1])], [2.0], 0.2, SimConfig(paths=2))
