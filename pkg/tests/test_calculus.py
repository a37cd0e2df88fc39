import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from heatframe.calculus import (ContourQuadrature, almost_orthogonality_slope, apply_calculus,
                                builtin_symbol, calculus_kernel_matrix, calderon_constant,
                                calderon_integral, composed_kernel, contour_apply, derived_phi,
                                derived_q, derived_qprime, fit_symbol_constant, normalized_q,
                                power_heat_symbol, verify_almost_orthogonality, verify_kernel_decay,
                                verify_kernel_holder)
from heatframe.grid import GridFunction
from heatframe.operators import OperatorModel, build_operator
from heatframe.quadrature import integrate_dt_over_t, log_trapezoid_weights
from oracles import calderon_gamma

complex_z = st.complex_numbers(min_magnitude=1e-3, max_magnitude=20, allow_nan=False, allow_infinity=False)


def test_zeta_exp_value(zeta1):
    assert zeta1(1.0) == pytest.approx(math.exp(-0.5), rel=1e-12)
    assert zeta1(1.0) == pytest.approx(0.60653066, abs=1e-8)


def test_beta_condition(zeta1):
    assert zeta1.satisfies_beta_condition(1)
    # |zeta(z)| |z|^6 on a ray peaks at (7/a)^7 e^-7 with a = cos(arg z)/2
    r = np.geomspace(1, 1e3, 2000)
    a = math.cos(math.pi / 8) / 2
    assert np.max(np.abs(zeta1(r * np.exp(1j * math.pi / 8))) * r**6) <= (7 / a) ** 7 * math.exp(-7) * (1 + 1e-9)


@pytest.mark.parametrize("name,k", [("zeta_exp", 0), ("zeta_exp", -2), ("gauss", 1)])
def test_builtin_errors(name, k):
    with pytest.raises(ValueError):
        builtin_symbol(name, k)


@settings(max_examples=50)
@given(z=complex_z)
def test_derived_symbols_closed_forms(z):
    zeta = builtin_symbol("zeta_exp", 1)
    assert derived_q(zeta)(z) == pytest.approx(z**4 * np.exp(-z), rel=1e-12, abs=1e-300)
    assert derived_phi(zeta)(z) == pytest.approx(z**3 * np.exp(-z / 2), rel=1e-12, abs=1e-300)
    assert derived_qprime(zeta)(z) == pytest.approx((4 * z**3 - z**4) * np.exp(-z), rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_qprime_matches_finite_difference(k):
    zeta = builtin_symbol("zeta_exp", k)
    q, dq = derived_q(zeta), derived_qprime(zeta)
    z = np.linspace(0.3, 12, 50) * np.exp(0.2j)
    eps = 1e-6
    fd = (q(z + eps) - q(z - eps)) / (2 * eps)
    assert np.allclose(dq(z), fd, rtol=1e-6, atol=1e-10)


def test_qprime_ray_bound(zeta1):
    r = np.geomspace(1e-4, 200, 2000)
    z = r * np.exp(1j * math.pi / 8)
    ratio = np.abs(derived_qprime(zeta1)(z)) * r / (r**4 * np.exp(-0.9 * r * math.cos(math.pi / 8)))
    assert np.all(np.isfinite(ratio)) and ratio.max() < 1e3


def test_symbol_bound_constant_finite(zeta1):
    C = fit_symbol_constant(zeta1, beta=7.0)
    assert np.isfinite(C) and C > 0


def test_q_kills_constants(lap64, dom64, zeta1):
    q = derived_q(zeta1)
    for t in (1e-4, 1e-2, 1.0):
        assert np.max(np.abs(apply_calculus(lap64, q, t, GridFunction.constant(dom64)).values)) <= 1e-10


def test_linearity_in_symbol(lap64, zeta1, rng):
    f = rng.standard_normal(64)
    a, b = derived_q(zeta1), power_heat_symbol(2)
    lhs = apply_calculus(lap64, a + b, 1e-2, f).values
    rhs = apply_calculus(lap64, a, 1e-2, f).values + apply_calculus(lap64, b, 1e-2, f).values
    assert np.allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())


@pytest.mark.parametrize("t", [1e-3, 1e-2, 1e-1])
def test_spectral_vs_contour(lap64, t, rng):
    f = rng.standard_normal(64)
    psi = power_heat_symbol(2)
    a = apply_calculus(lap64, psi, t, f)
    b = apply_calculus(lap64, psi, t, f, ContourQuadrature(nodes=200))
    assert (a - b).norm(2) <= 1e-6 * a.norm(2)


@pytest.mark.parametrize("kind", ["schrodinger", "divergence_form"])
def test_spectral_vs_contour_other_kinds(dom64, kind, rng):
    field_ = 1.0 + 0.5 * np.cos(2 * np.pi * dom64.axis)
    op = build_operator(kind, dom64, **({"potential": field_} if kind == "schrodinger" else {"coefficient": field_}))
    f = rng.standard_normal(64)
    q = derived_q(builtin_symbol("zeta_exp", 1))
    a = apply_calculus(op, q, 1e-3, f)
    b = apply_calculus(op, q, 1e-3, f, "contour")
    assert (a - b).norm(2) <= 1e-6 * a.norm(2)


def test_contour_on_nonsymmetric_matrix_against_expm(dom64, lap64, rng):
    A = lap64.matrix + 50.0 * (np.roll(np.eye(64), 1, axis=1) - np.roll(np.eye(64), -1, axis=1))
    t = 2e-3
    f = rng.standard_normal(64)
    exact = (t * A) @ (t * A) @ scipy.linalg.expm(-t * A) @ f
    got = contour_apply(A, power_heat_symbol(2), t, f, ContourQuadrature())
    assert np.linalg.norm(got - exact) <= 1e-8 * np.linalg.norm(exact)
    op = OperatorModel.from_matrix(dom64, A)
    assert not op.is_symmetric


def test_contour_under_resolved_raises(lap64, rng):
    with pytest.raises(ValueError, match="node"):
        apply_calculus(lap64, power_heat_symbol(2), 1e-2, rng.standard_normal(64), ContourQuadrature(nodes=16))


def test_kernel_consistency_and_symmetry(lap64, zeta1, rng):
    q = derived_q(zeta1)
    f = GridFunction(lap64.domain, rng.standard_normal(64))
    K = calculus_kernel_matrix(lap64, q, 1e-3)
    direct = apply_calculus(lap64, q, 1e-3, f)
    assert (K.apply(f) - direct).norm(2) <= 1e-10 * direct.norm(2)
    assert np.max(np.abs(K.values - K.values.T)) <= 1e-12 * np.max(np.abs(K.values))


@pytest.mark.parametrize("t", [1e-3, 1e-2])
def test_kernel_decay_constant_finite(lap128, zeta1, t):
    rep = verify_kernel_decay(lap128, derived_q(zeta1), t)
    assert rep.passed and np.isfinite(rep.fitted_C)


@pytest.mark.parametrize("k", [1, 2])
def test_calderon_against_gamma(k):
    c = calderon_constant(builtin_symbol("zeta_exp", k))
    assert c == pytest.approx(calderon_gamma(k), rel=1e-8)


def test_calderon_exact_values():
    assert calderon_constant(builtin_symbol("zeta_exp", 1)) == pytest.approx(9.84375, rel=1e-8)
    assert calderon_constant(builtin_symbol("zeta_exp", 2)) == pytest.approx(39916800 / 8192, rel=1e-8)


def test_calderon_scaling_invariance():
    q = lambda t: t**4 * np.exp(-t)
    base = calderon_integral(q, alpha=4)
    scaled = calderon_integral(lambda t: q(3 * t), alpha=4)
    assert scaled == pytest.approx(base, rel=1e-9)


def test_calderon_narrow_range_raises():
    with pytest.raises(ValueError, match="too narrow"):
        calderon_integral(lambda t: t**4 * np.exp(-t), t_lo=1e-2, t_hi=10, alpha=4)


def test_reproducing_formula_on_spectrum(lap128, zeta1):
    qn = normalized_q(zeta1)
    lam = lap128.spectral.eigenvalues
    lam = lam[lam > 0]
    weights = [integrate_dt_over_t(lambda t, l=l: qn(t * t * l) ** 2, 1e-7, 1e3, 6000) for l in lam]
    assert np.allclose(weights, 1.0, rtol=1e-8)


def test_continuous_littlewood_paley_bounds(lap128, zeta1, rng):
    qn = normalized_q(zeta1)
    t = np.geomspace(1e-4, 10, 300)
    w = log_trapezoid_weights(t)
    ratios = []
    for _ in range(20):
        f = GridFunction(lap128.domain, rng.standard_normal(128))
        sq = sum(wk * apply_calculus(lap128, qn, tk**2, f).norm(2) ** 2 for tk, wk in zip(t, w))
        ratios.append(math.sqrt(sq) / f.norm(2))
    assert max(ratios) / min(ratios) <= 10


def test_almost_orthogonality_equal_times(lap128, zeta1):
    rep = verify_almost_orthogonality(lap128, zeta1, 0.05, 0.05)
    assert rep.extra["min_ratio"] == 1.0
    assert rep.extra["sup_ratio"] == pytest.approx(1.0)
    assert rep.passed


def test_composition_consistency(lap64, zeta1):
    q = derived_q(zeta1)
    Ka = calculus_kernel_matrix(lap64, q, 0.04**2).values
    Kb = calculus_kernel_matrix(lap64, q, 0.01**2).values
    prod = composed_kernel(lap64, q, 0.04**2, q, 0.01**2).values
    expected = Ka @ Kb * lap64.domain.cell_volume
    assert np.max(np.abs(prod - expected)) <= 1e-10 * np.max(np.abs(expected))


def test_almost_orthogonality_regime(lap128, zeta1):
    with pytest.raises(ValueError, match="small-time"):
        verify_almost_orthogonality(lap128, zeta1, 0.5, 0.01)


@pytest.mark.parametrize("which", ["q", "qprime"])
def test_almost_orthogonality_bound_holds_at_least_first_power(lap128, zeta1, which):
    # the bound only asks for decay at least like s/t, so one constant must serve every s
    slope, reports = almost_orthogonality_slope(lap128, zeta1, 0.05, which=which)
    assert slope >= 1.0
    Cs = [r.fitted_C for r in reports]
    assert np.all(np.isfinite(Cs)) and np.all(np.diff(Cs) <= 0)


def test_holder_constant_stable(lap128):
    heat = power_heat_symbol(0)
    Cs = [verify_kernel_holder(lap128, heat, t).fitted_C for t in (1e-3, 4e-3, 1.6e-2)]
    assert max(Cs) / min(Cs) <= 2


def test_holder_precondition(lap64):
    with pytest.raises(ValueError, match="admissible"):
        verify_kernel_holder(lap64, power_heat_symbol(0), 1e-8)
