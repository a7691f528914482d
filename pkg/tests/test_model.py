import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from heatsing.model import (
    AbsorptionParams,
    DomainError,
    SimilarityTransform,
    absorption_flow,
    c_alpha,
    critical_exponent,
    flat_exact_solution,
    heat_kernel,
    kernel_power_integral,
    kernel_space_integral,
    similarity_apply,
    sphere_area,
)

alphas = st.floats(-0.9, 3.0)
qs = st.floats(1.05, 6.0)
dims = st.integers(1, 5)


@pytest.mark.parametrize(
    "alpha,q,dim",
    [(-1.0, 2.0, 1), (0.0, 1.0, 1), (0.0, 0.5, 1), (0.0, 2.0, 0), (0.0, 2.0, 1.5), (float("nan"), 2.0, 1)],
)
def test_params_reject_invalid(alpha, q, dim):
    with pytest.raises(ValueError):
        AbsorptionParams(alpha, q, dim)


def test_critical_exponent_examples():
    assert critical_exponent(AbsorptionParams(0.0, 1.5, 2)) == 2.0
    assert critical_exponent(AbsorptionParams(3.0, 1.5, 4)) == 3.0
    assert critical_exponent(AbsorptionParams(-0.5, 1.5, 1)) == 2.0


def test_c_alpha_examples():
    assert c_alpha(AbsorptionParams(0.0, 2.0)) == 1.0
    assert c_alpha(AbsorptionParams(1.0, 2.0)) == 2.0
    assert c_alpha(AbsorptionParams(0.0, 3.0)) == pytest.approx(1 / math.sqrt(2), rel=1e-15)


@given(alphas, qs, dims)
def test_subcritical_equivalence(alpha, q, dim):
    p = AbsorptionParams(alpha, q, dim)
    assert (q < p.q_crit) == ((q - 1) * dim < 2 * (1 + alpha)) or math.isclose(q, p.q_crit, rel_tol=1e-12)


def test_derived_constants_not_stale():
    p = AbsorptionParams(1.0, 3.0, 2)
    assert p.beta == pytest.approx(1.0)
    assert p.q_crit == pytest.approx(3.0)
    with pytest.raises(AttributeError):
        p.q = 2.0


def test_heat_kernel_examples():
    assert heat_kernel(0.0, 1 / (4 * math.pi), 1) == pytest.approx(1.0, rel=1e-15)
    assert heat_kernel(0.0, 1.0, 2) == pytest.approx(0.0795775, rel=1e-6)
    with pytest.raises(DomainError):
        heat_kernel(0.0, 0.0, 1)


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
@pytest.mark.parametrize("t", [0.01, 1.0])
def test_heat_kernel_normalization(dim, t):
    val, _ = integrate.quad(lambda r: sphere_area(dim) * r ** (dim - 1) * heat_kernel(r, t, dim), 0, np.inf, epsabs=0)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_flat_exact_examples():
    assert flat_exact_solution(AbsorptionParams(0.0, 2.0), 0.0, 1.0) == 1.0
    assert flat_exact_solution(AbsorptionParams(1.0, 2.0), 0.0, 1.0) == 2.0
    assert flat_exact_solution(AbsorptionParams(0.0, 2.0), 0.5, 1.0) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        flat_exact_solution(AbsorptionParams(0.0, 2.0), 0.5, 0.5)


@given(alphas, qs, st.floats(0.05, 2.0))
def test_flat_solution_solves_ode(alpha, q, t):
    p = AbsorptionParams(alpha, q)
    h = 1e-4 * t / (1 + p.beta)
    phi = lambda s: flat_exact_solution(p, 0.0, s)
    deriv = (phi(t + h) - phi(t - h)) / (2 * h)
    assert deriv + t**alpha * phi(t) ** q == pytest.approx(0.0, abs=1e-6 * t**alpha * phi(t) ** q)


def test_absorption_flow_examples():
    p = AbsorptionParams(0.0, 2.0)
    assert absorption_flow(p, 1.0, 0.0, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert absorption_flow(p, 0.0, 0.3, 2.0) == 0.0
    q = AbsorptionParams(0.5, 3.0)
    assert absorption_flow(q, flat_exact_solution(q, 0.0, 0.2), 0.2, 0.7) == pytest.approx(
        flat_exact_solution(q, 0.0, 0.7), rel=1e-13
    )


def test_absorption_flow_against_ode_integrator():
    p = AbsorptionParams(-0.5, 1.7)
    sol = integrate.solve_ivp(lambda t, u: -(t**p.alpha) * u**p.q, (0.1, 1.3), [3.0], rtol=1e-12, atol=1e-14)
    assert absorption_flow(p, 3.0, 0.1, 1.3) == pytest.approx(sol.y[0][-1], rel=1e-9)


def test_absorption_flow_rejects_backward_time():
    with pytest.raises(DomainError):
        absorption_flow(AbsorptionParams(0.0, 2.0), 1.0, 1.0, 0.5)


def test_absorption_flow_infinite_datum_is_phi0():
    p = AbsorptionParams(0.0, 2.0)
    assert absorption_flow(p, np.inf, 0.0, 0.5) == pytest.approx(flat_exact_solution(p, 0.0, 0.5))


@given(alphas, qs, st.floats(1e-3, 1e3), st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_absorption_flow_semigroup(alpha, q, u0, t0, d1, d2):
    p = AbsorptionParams(alpha, q)
    t1, t2 = t0 + d1, t0 + d1 + d2
    direct = absorption_flow(p, u0, t0, t2)
    composed = absorption_flow(p, absorption_flow(p, u0, t0, t1), t1, t2)
    assert composed == pytest.approx(direct, rel=1e-12)


@given(alphas, qs, st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_absorption_flow_monotone(alpha, q, a, b, s1, s2):
    p = AbsorptionParams(alpha, q)
    lo, hi = min(a, b), max(a, b)
    assert absorption_flow(p, lo, 0.1, 0.5) <= absorption_flow(p, hi, 0.1, 0.5)
    d1, d2 = min(s1, s2), max(s1, s2)
    assert absorption_flow(p, hi, 0.1, 0.1 + d2) <= absorption_flow(p, hi, 0.1, 0.1 + d1)


def test_kernel_space_integral_matches_quadrature():
    for dim, r, t in [(1, 2.0, 0.3), (2, 1.5, 0.1), (3, 3.0, 1.0)]:
        val, _ = integrate.quad(
            lambda x: sphere_area(dim) * x ** (dim - 1) * heat_kernel(x, t, dim) ** r, 0, np.inf, epsabs=0
        )
        assert float(kernel_space_integral(r, t, dim)) == pytest.approx(val, rel=1e-9)


def test_kernel_power_integral_examples():
    p = AbsorptionParams(0.0, 3.0, 1)
    two = kernel_power_integral(p, 2.0, 1.0, 1e-12)
    assert two.value == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-4)
    assert two.verdict == "finite"
    one = kernel_power_integral(p, 1.0, 1.0, 1e-10)
    assert one.value == pytest.approx(1.0 - 1e-10, rel=1e-10)
    assert kernel_power_integral(p, 3.1, 1.0, 1e-10).verdict == "divergent-trend"


def test_kernel_power_integral_closed_form_oracle():
    # space integral (8 pi t)^-1/2 -> time integral 2 (sqrt T - sqrt t_min) / sqrt(8 pi)
    p = AbsorptionParams(0.0, 3.0, 1)
    res = kernel_power_integral(p, 2.0, 1.0, 1e-6)
    assert res.value == pytest.approx(2 * (1 - 1e-3) / math.sqrt(8 * math.pi), rel=1e-10)


@pytest.mark.parametrize("alpha,q,dim", [(0.0, 3.0, 1), (1.0, 2.0, 2), (-0.5, 2.0, 1), (0.5, 2.0, 3)])
def test_kernel_verdict_flips_at_critical_exponent(alpha, q, dim):
    p = AbsorptionParams(alpha, q, dim)
    assert kernel_power_integral(p, p.q_crit - 0.1, 1.0, 1e-10).verdict == "finite"
    assert kernel_power_integral(p, p.q_crit + 0.1, 1.0, 1e-10).verdict == "divergent-trend"


def test_kernel_power_integral_validates():
    p = AbsorptionParams(0.0, 2.0)
    with pytest.raises(ValueError):
        kernel_power_integral(p, 0.5)
    with pytest.raises(ValueError):
        kernel_power_integral(p, 2.0, 1.0, 2.0)


def test_similarity_identity_and_flat_invariance():
    p = AbsorptionParams(1.0, 3.0)
    f = lambda x, t: np.cos(x) * t
    x, t = np.array([0.1, 0.7]), np.array([0.2, 0.9])
    assert np.array_equal(similarity_apply(SimilarityTransform(1.0), f, p)(x, t), f(x, t))
    flat = lambda x, t: flat_exact_solution(p, 0.0, t) + 0 * x
    for m in (0.25, 0.5, 2.0, 7.0):
        np.testing.assert_allclose(similarity_apply(SimilarityTransform(m), flat, p)(x, t), flat(x, t), rtol=1e-13)


# powers of 4 keep sqrt(m) exact, so the composition law holds bit for bit
@given(st.sampled_from([0.0625, 0.25, 1.0, 4.0, 16.0]), st.sampled_from([0.25, 4.0, 16.0]))
def test_similarity_composition(m1, m2):
    p = AbsorptionParams(0.0, 2.0)
    f = lambda x, t: np.exp(-x) * (1 + t)
    x, t = np.array([0.5, 1.0]), np.array([0.25, 1.0])
    a = similarity_apply(SimilarityTransform(m1), similarity_apply(SimilarityTransform(m2), f, p), p)(x, t)
    b = similarity_apply(SimilarityTransform(m1).compose(SimilarityTransform(m2)), f, p)(x, t)
    np.testing.assert_array_equal(a, b)


def test_similarity_rejects_nonpositive():
    with pytest.raises(ValueError):
        SimilarityTransform(0.0)
