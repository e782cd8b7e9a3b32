import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stablelike.analyze import (example16_rate, fit_holder, fit_modulus, holder_envelope,
                                holder_fit, holder_rate, long_rows, modulus_envelope,
                                modulus_fit, tail_consistency, weighted_slope)
from stablelike.fields import ClippedSin, Constant
from stablelike.model import IndexField, ReferenceFunction, make_bass_spec
from stablelike.simulate import SimConfig
from stablelike.simulate.estimates import CouplingTail, _summarise

SPEC15 = make_bass_spec(1, IndexField.constant(1, 1.5))
R = 0.1 * 2.0 ** -np.arange(6)


def test_weighted_slope_recovers_power_law():
    se = 1e-3 * R
    fit = weighted_slope(np.log(R), 2.0 * R ** 0.7, se)
    assert fit.slope == pytest.approx(0.7, abs=1e-12)
    assert fit.ci[0] < 0.7 < fit.ci[1]


def test_weighted_slope_needs_four_points():
    diff = np.array([1.0, 0.5, 0.25, 0.0, 0.0, 0.0])
    fit = weighted_slope(np.log(R), diff, np.full(6, 0.01))
    assert math.isnan(fit.slope) and fit.used.sum() == 3


def test_constant_function_inconclusive():
    fit = holder_fit(SPEC15, Constant(1, 0.4), [0.0], [1.0], 0.5, 0.5,
                     SimConfig(delta_cut=1e-3, paths=200, seed=1))
    assert fit.verdict == "inconclusive"
    assert fit.diff.tolist() == [0.0] * 6
    assert not fit.slope_route and not fit.envelope_route


def test_fit_holder_pass_and_fail():
    se = 1e-4 * np.ones(6)
    ok = fit_holder(R, R, se, 0.5, 0.5, 1.5)
    assert ok.verdict == "pass" and ok.slope_route
    bad = fit_holder(R, 0.3 * R ** 0.2, se, 0.5, 0.5, 1.5)
    assert bad.verdict == "fail"


def test_holder_envelope_at_unit_time():
    assert float(holder_envelope(1.0, 0.5, 1.5, C=3.7)) == 3.7
    assert float(holder_envelope(5.0, 0.5, 1.5, C=3.7)) == 3.7


@given(st.floats(0.05, 0.95), st.floats(0.5, 1.95), st.floats(0.01, 0.9), st.floats(0.01, 10))
def test_holder_envelope_monotone(beta, alpha0, eps0, C0):
    t = np.geomspace(1e-6, eps0 ** alpha0, 200)
    v = holder_envelope(t, beta, alpha0, C=1.0, C0=C0, eps0=eps0)
    assert np.all(np.diff(v) <= 1e-12 * v[:-1])


def test_modulus_normaliser_closed_form():
    phi = ReferenceFunction.logpower(1.0)
    np.testing.assert_allclose(phi.F(R), R * (1 + np.log(6 / R)), rtol=1e-13)
    np.testing.assert_allclose(ReferenceFunction.constant(1.0).F(R), R)


def test_modulus_rate_at_e_inverse():
    a0 = 1.5
    t = math.exp(-1.0)
    closed = float(example16_rate("logpower", t, a0, 1.0))
    # |log t| = 1, so the closed form reduces to t^{-1/alpha0}
    assert closed == pytest.approx(t ** (-1 / a0), rel=1e-14)
    env, _ = modulus_envelope(ReferenceFunction.logpower(1.0), np.array([t]), a0, 0.1)
    # the envelope matches the closed form up to a constant; same constant at nearby times
    env2, _ = modulus_envelope(ReferenceFunction.logpower(1.0), np.array([t / 2]), a0, 0.1)
    ratio = env[0] / closed
    ratio2 = env2[0] / float(example16_rate("logpower", t / 2, a0, 1.0))
    assert 0.2 < ratio / ratio2 < 5


def test_modulus_envelope_decreasing_in_t():
    env, eps = modulus_envelope(ReferenceFunction.loglog(), np.geomspace(1e-4, 1, 20), 1.5, 0.1)
    assert np.all(np.diff(env) < 0)
    assert np.all((eps > 0) & (eps <= 0.1))


def test_example16_rate_unknown():
    with pytest.raises(ValueError):
        example16_rate("affine", 0.1, 1.5)


def test_fit_modulus_pass():
    phi = ReferenceFunction.logpower(1.0)
    diff = 0.2 * phi.F(R)
    fit = fit_modulus(R, diff, 1e-5 * np.ones(6), 0.5, phi, 1.5, 0.1)
    assert fit.verdict == "pass" and fit.bounded
    assert fit.rate_closed_form == pytest.approx(float(example16_rate("logpower", 0.5, 1.5)))


def test_modulus_fit_needs_alpha_above_one():
    spec = make_bass_spec(1, IndexField.constant(1, 0.9))
    with pytest.raises(ValueError):
        modulus_fit(spec, ClippedSin(1), [0.0], [1.0], 0.5, ReferenceFunction.loglog(),
                    SimConfig(paths=2))


def test_holder_beta_precondition():
    with pytest.raises(ValueError):
        holder_fit(SPEC15, ClippedSin(1), [0.0], [1.0], 0.5, 1.0, SimConfig(paths=2))


def test_crn_variance_reduction_and_determinism():
    cfg = SimConfig(delta_cut=1e-3, paths=2000, seed=4)
    a = holder_fit(SPEC15, ClippedSin(1), [0.3], [1.0], 0.5, 0.5, cfg)
    b = holder_fit(SPEC15, ClippedSin(1), [0.3], [1.0], 0.5, 0.5, cfg)
    assert np.all(a.crn_gain > 1.0)
    assert a.to_dict() == b.to_dict()
    again = fit_holder(a.r, a.diff, a.diff_se, a.t, a.beta, a.alpha0, a.sup_norm)
    assert again.to_dict() | {"crn_gain": None} == a.to_dict() | {"crn_gain": None}


def test_holder_rate_out_of_sample():
    fits = [fit_holder(R, R * min(t, 1) ** (-1 / 3), 1e-5 * np.ones(6), t, 0.5, 1.5)
            for t in (0.25, 0.5, 1.0)]
    rate = holder_rate(fits, 0.5, 1.5)
    assert rate["holds"] and rate["constant"] > 0


def _tail(r, eps, T, S, t_grid, t_max):
    T = np.asarray(T, float)
    S = np.asarray(S, float)
    tg = np.asarray(t_grid, float)
    return CouplingTail(np.asarray(r, float), eps, tg, t_max, T.shape[0],
                        *_summarise(T, S, tg, t_max), 1e-6)


def test_tail_consistency_trivial_at_r_eps():
    # every path exceeds immediately and never couples: bound (r/eps)^beta = 1 still holds
    T = np.full((50, 1), np.inf)
    S = np.zeros((50, 1))
    rep = tail_consistency(_tail([0.2], 0.2, T, S, [0.5, 1.0], 1.0), 0.5, 1.0, 1.5)
    assert rep.passed_exceed
    assert np.all(rep.exceed_bound == 1.0)


def test_tail_consistency_quarter_distance():
    rng = np.random.default_rng(0)
    T = rng.exponential(0.05, size=(4000, 1))
    S = np.where(rng.uniform(size=(4000, 1)) < 0.3, rng.uniform(0, 0.05, (4000, 1)), np.inf)
    rep = tail_consistency(_tail([0.05], 0.2, T, S, [0.5, 1.0, 2.0], 2.0), 0.5, 1.0, 1.5)
    assert rep.exceed_bound[0] == pytest.approx(0.5)
    assert rep.tail_monotone and rep.passed


def test_tail_consistency_detects_violation():
    T = np.full((100, 1), np.inf)
    S = np.zeros((100, 1))
    rep = tail_consistency(_tail([0.02], 0.2, T, S, [0.5], 1.0), 0.5, 1.0, 1.5)
    assert not rep.passed_exceed and not rep.passed


def test_long_rows_format():
    cols, rows = long_rows([0.1, 0.05], 0.5, [1, 2], [0, 1], [2, 3], [5, 5])
    assert cols == ("r", "t", "estimate", "ci_lo", "ci_hi", "bound")
    assert rows[1] == (0.05, 0.5, 2.0, 1.0, 3.0, 5.0)
