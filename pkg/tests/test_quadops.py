import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablelike.fields import Affine, CompactBump, Constant, Cosine, GaussBump, SumField
from stablelike.geometry import CoupledKernel
from stablelike.model import (IndexField, KernelField, OperatorSpec, ReferenceFunction,
                              make_bass_spec, make_constant_spec)
from stablelike.quadops import (QuadratureScheme, TestFunctionError, apply_coupling_operator,
                                apply_generator, build_test_function, check_assumptions,
                                compensator_drift, drift_profile, h4_integral, lemma33_check,
                                scalar_inequality_suite)
from stablelike.quadops.checks import class_diagnostics

from conftest import presets

Q = QuadratureScheme(tol_abs=1e-7, tol_rel=1e-6)


# ---------------------------------------------------------------------------
# generator
# ---------------------------------------------------------------------------

def test_eigenrelation_cos_alpha_one():
    spec = make_bass_spec(1, IndexField.constant(1, 1.0))
    assert apply_generator(spec, Cosine([1.0]), [0.0]) == pytest.approx(-1.0, abs=1e-4)


def test_constant_field_gives_zero():
    for spec in presets(2).values():
        assert apply_generator(spec, Constant(2, 3.0), [0.1, 0.2]) == 0.0


def test_affine_field_symmetric_kernel():
    for spec in presets(2).values():
        v = apply_generator(spec, Affine([0.3, -1.0], 2.0), [0.5, 0.1], Q, full_output=True)
        assert abs(v.value) <= Q.tol_abs + v.error


def test_error_estimate_is_honest():
    spec = presets(2)["bass_bump"]
    f = GaussBump([0.2, 0.0], 0.7)
    coarse = apply_generator(spec, f, [0.1, 0.3], Q, full_output=True)
    fine = apply_generator(spec, f, [0.1, 0.3],
                           QuadratureScheme(tol_abs=1e-7, tol_rel=1e-6, panels_per_decade=8),
                           full_output=True)
    assert abs(coarse.value - fine.value) <= 4 * max(coarse.error, fine.error) + Q.tol_abs


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_skew_kernel_generator_matches_direct_quadrature():
    # d = 1 reference with scipy quad on each side of the singularity
    from scipy import integrate
    spec = OperatorSpec(1, IndexField.constant(1, 1.3),
                        KernelField.skew(1, 1.0, 0.5, [1.0], [2.0]))
    f = GaussBump([0.0], 0.8)
    x = 0.35
    fx = float(f.value([x]))
    g = float(f.grad([x])[0])

    def integrand(z):
        comp = g * z if abs(z) <= 1 else 0.0
        return (float(f.value([x + z])) - fx - comp) * float(spec.density([x], [z]))

    ref = 0.0
    for a, b in ((-math.inf, -1), (-1, 0), (0, 1), (1, math.inf)):
        v, _ = integrate.quad(integrand, a, b, limit=400, epsabs=1e-11, epsrel=1e-11)
        ref += v
    assert apply_generator(spec, f, [x], Q) == pytest.approx(ref, abs=1e-6, rel=1e-5)


# ---------------------------------------------------------------------------
# coupling operator
# ---------------------------------------------------------------------------

def test_coupling_operator_constant_field():
    ck = CoupledKernel(presets(1)["bass_bump"], [0.0], [0.3])
    F = SumField(Constant(1, 1.0), Constant(1, 0.0))
    F.constant = True
    assert apply_coupling_operator(ck, F) == 0.0


@pytest.mark.parametrize("name", ["constant", "bass_bump", "sde"])
def test_coupling_operator_consistency(name, rng):
    spec = presets(2)[name]
    g = CompactBump([0.1, -0.2], 1.0, 1.0)
    h = CompactBump([-0.1, 0.1], 0.8, 0.5)
    F = SumField(g, h)
    for _ in range(2):
        x = rng.normal(size=2) * 0.4
        y = x + rng.normal(size=2) * 0.3
        lt = apply_coupling_operator(CoupledKernel(spec, x, y), F, Q)
        lg = apply_generator(spec, g, x, Q)
        lh = apply_generator(spec, h, y, Q)
        assert abs(lt - lg - lh) <= 2 * (Q.tol_abs + Q.tol_rel * (abs(lg) + abs(lh)))


def test_coupling_operator_negative_drift_small_r():
    from stablelike.fields import RadialPairField
    spec = make_constant_spec(1, 1.5, 1.0)
    tf = build_test_function("power", n=400, beta=0.5)
    ck = CoupledKernel(spec, [0.0], [0.02])
    assert apply_coupling_operator(ck, RadialPairField(tf, 1), Q) < 0


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

def test_power_test_function_examples():
    tf = build_test_function("power", n=4, beta=0.5)
    assert float(tf.value(0.15)) == pytest.approx(0.0225, rel=1e-14)
    assert float(tf.value(0.5)) == pytest.approx(math.sqrt(0.5), rel=1e-14)


def test_modulus_test_function_example():
    tf = build_test_function("modulus", n=4, phi=ReferenceFunction.logpower(1.0))
    assert float(tf.value(1.0)) == pytest.approx(1 + math.log(6), rel=1e-12)
    F2 = float(ReferenceFunction.logpower(1.0).F(2.0))
    np.testing.assert_allclose(tf.value(np.array([3.0, 5.0, 50.0])), F2 + 1, rtol=1e-14)


@given(st.floats(0.05, 0.99), st.integers(1, 2000))
@settings(max_examples=40)
def test_power_test_function_domination(beta, n):
    tf = build_test_function("power", n=n, beta=beta)
    r = np.unique(np.r_[np.geomspace(1e-6, 10, 1000), tf.breakpoints])
    v = tf.value(r)
    assert np.all(v <= r ** beta * (1 + 1e-12))
    assert np.all(np.diff(v) >= -1e-15)
    np.testing.assert_allclose(tf.value(r[r <= 1 / (n + 1)]), r[r <= 1 / (n + 1)] ** 2)


@pytest.mark.parametrize("phi", [ReferenceFunction.loglog(), ReferenceFunction.logpower(1.0),
                                 ReferenceFunction.logpower(2.0)])
@pytest.mark.parametrize("n", [1, 4, 100, 4000])
def test_modulus_test_function_domination(phi, n):
    tf = build_test_function("modulus", n=n, phi=phi)
    r = np.unique(np.r_[np.geomspace(1e-6, 2, 1000), tf.breakpoints])
    r = r[r <= 2]
    v = tf.value(r)
    assert np.all(v <= phi.F(r) * (1 + 1e-12))
    assert np.all(np.diff(tf.value(np.linspace(0, 4, 2001))) >= -1e-15)


def test_test_function_is_c2():
    # one-sided limits agree: the jump across each breakpoint shrinks linearly with h
    for tf in (build_test_function("power", n=10, beta=0.5),
               build_test_function("modulus", n=10, phi=ReferenceFunction.loglog())):
        for b in tf.breakpoints:
            for fn in (tf.value, tf.d1, tf.d2):
                jump = [abs(float(fn(b + h)) - float(fn(b - h))) for h in (1e-7, 1e-9)]
                assert jump[1] <= 0.02 * jump[0] + 1e-12 * max(1.0, abs(float(fn(b)))), (b, fn)


def test_test_function_parameter_errors():
    with pytest.raises(ValueError):
        build_test_function("power", n=4, beta=1.5)
    with pytest.raises(ValueError):
        build_test_function("modulus", n=4)
    with pytest.raises(ValueError):
        build_test_function("power", n=0, beta=0.5)
    assert issubclass(TestFunctionError, ValueError)


# ---------------------------------------------------------------------------
# h4, drift, assumptions
# ---------------------------------------------------------------------------

def test_h4_zero_for_symmetric_kernel():
    spec = presets(2)["bass_bump"]
    assert abs(h4_integral(spec, [0.1, 0.0], [0.2, 0.05], Q)) <= Q.tol_abs


def test_h4_zero_for_constant_coefficients():
    assert h4_integral(make_constant_spec(1, 1.2, 1.0), [0.0], [0.1]) == 0.0


def test_h4_decays_for_skew_kernel():
    spec = OperatorSpec(1, IndexField.bump(1, 1.2, 0.1),
                        KernelField.skew(1, 1.0, 0.5, [1.0], [1.0]))
    v = [abs(h4_integral(spec, [0.3], [0.3 + r], Q)) for r in (1e-1, 1e-2, 1e-3)]
    assert v[0] > v[1] > v[2]


def test_compensator_drift():
    assert not compensator_drift(presets(2)["bass_bump"], [0.1, 0.2], 1e-3).any()
    spec = OperatorSpec(1, IndexField.constant(1, 1.3), KernelField.skew(1, 1.0, 0.5, [1.0], [2.0]))
    from scipy import integrate
    x = 0.4
    ref = -sum(integrate.quad(lambda z: z * float(spec.density([x], [z])), a, b,
                              epsabs=1e-13, epsrel=1e-12)[0] for a, b in ((-1, -1e-3), (1e-3, 1)))
    assert float(compensator_drift(spec, [x], 1e-3)[0]) == pytest.approx(ref, rel=1e-6)


def test_drift_profile_constant_coefficients_small_grid():
    spec = make_constant_spec(1, 1.5, 1.0)
    tf = build_test_function("power", n=4000, beta=0.5)
    rep = drift_profile(spec, tf, Q, r_grid=np.geomspace(1e-3, 1e-1, 7))
    assert rep.passed and rep.flags["all_negative"]
    assert rep.eps0 == pytest.approx(0.1)
    assert rep.C0 > 0
    assert abs(rep.slope - (0.5 - 1.5)) <= 0.15


def test_drift_profile_grid_validation():
    tf = build_test_function("power", n=10, beta=0.5)
    with pytest.raises(ValueError):
        drift_profile(make_constant_spec(1, 1.5, 1.0), tf, Q, r_grid=[1e-3, 1e-2])


def test_check_assumptions_constant_coefficients():
    rep = check_assumptions(make_constant_spec(2, 1.4, 1.0), ReferenceFunction.loglog(),
                            samples=8, probes=100, h4_samples=2)
    for k, v in rep.curves.items():
        assert np.all(v == 0), k


def test_check_assumptions_lipschitz_ratio_decays():
    # Lipschitz index with alpha_2 < 1 and constant n: the ratio curve tends to 0
    spec = OperatorSpec(1, IndexField.periodic(1, 0.7, 0.2, [1.0]), KernelField.constant(1, 1.0))
    rep = check_assumptions(spec, samples=16, probes=100, h4_samples=2)
    assert rep.verdicts["P18"] and rep.verdicts["H2"]
    assert rep.curves["P18"][-1] < 0.2 * rep.curves["P18"][0]


def test_check_assumptions_radii_validation():
    with pytest.raises(ValueError):
        check_assumptions(presets(1)["constant"], radii=[1e-3, 1e-2])


def test_class_diagnostics_loglog():
    diag = class_diagnostics(ReferenceFunction.loglog(), 1.5)
    assert diag["in_class_D"] and diag["limsup_ok"]
    assert np.max(diag["ratio"][4:]) < 1.5 - 2


def test_second_difference_examples():
    phi = ReferenceFunction.affine(2.0, 1.0)
    worst, _ = lemma33_check(phi, grid=[(0.5, 0.0), (0.5, 0.25), (1.0, 1.0), (0.1, 0.05)])
    assert abs(worst) <= 1e-15
    for phi in (ReferenceFunction.loglog(), ReferenceFunction.logpower(1.0)):
        worst, _ = lemma33_check(phi, size=12)
        assert worst <= 1e-10
    with pytest.raises(ValueError):
        lemma33_check(phi, grid=[(0.1, 0.2)])


def test_scalar_inequalities_small_sample():
    rep = scalar_inequality_suite(n=30_000, seed=3)
    assert set(rep) == {"binomial", "distance", "concave_power", "primitive"}
    assert max(rep.values()) <= 1e-10


@given(st.floats(0, 1), st.floats(1e-6, 1))
def test_binomial_inequality_edge(s, b):
    lhs = (1 + s) ** b + (1 - s) ** b
    assert lhs <= 2 + b * (b - 1) * s * s + 1e-12
