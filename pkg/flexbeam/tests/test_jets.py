"""Jet arithmetic, closed-form signals, the Gevrey bump and the flat parameter."""

from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from flexbeam.errors import (
    MalformedSpecError,
    MismatchedJetsError,
    NonPositiveBaseError,
    NonPositiveParameterError,
    OutOfDomainError,
    UnknownSpecError,
)
from flexbeam.models import ConstantSignal, PolyExpSignal, PolynomialSignal
from flexbeam.numerics.jets import (
    Jet,
    bump_density,
    bump_normalizer,
    closed_form_jet,
    gevrey_constant,
    jet_add,
    jet_exp,
    jet_mul,
    jet_rpow,
    make_trajectory_spec,
    p_jet,
    p_jets,
    parse_signal,
    psi_jet,
    psi_value,
    signal_jet,
)

PROBLEM1 = {"poly": [1.0], "exp_poly": [0.0, 0.0, 10.0], "rate": -2.0}


@pytest.fixture(scope="module")
def transfer():
    """Problem-1 style transfer to rest at 0 over 3 s."""
    return make_trajectory_spec(
        3.0, 1.5, PolyExpSignal(**PROBLEM1), ConstantSignal(value=0.0)
    )


# --- Arithmetic ---


def test_multiplicative_identity():
    b = Jet(0.0, np.array([0.3, -1.0, 2.0, 0.5]))
    one = Jet.constant(0.0, 1.0, 3)
    np.testing.assert_array_equal(jet_mul(one, b).c, b.c)


def test_square_of_variable():
    t = Jet.variable(0.0, 2)
    assert jet_mul(t, t).to_list() == [0.0, 0.0, 1.0]


def test_mismatched_jets():
    with pytest.raises(MismatchedJetsError):
        jet_mul(Jet.variable(0.0, 3), Jet.variable(1.0, 3))
    with pytest.raises(MismatchedJetsError):
        jet_add(Jet.variable(0.0, 3), Jet.variable(0.0, 4))


def test_exp_of_zero():
    assert jet_exp(Jet.constant(0.0, 0.0, 5)).to_list() == [1.0, 0, 0, 0, 0, 0]


def test_exp_of_minus_t_squared():
    a = Jet(0.0, np.array([0.0, 0.0, -1.0, 0.0, 0.0]))
    np.testing.assert_allclose(jet_exp(a).c, [1.0, 0.0, -1.0, 0.0, 0.5], atol=1e-15)


def test_rpow_constant():
    out = jet_rpow(Jet.constant(0.0, 4.0, 3), -2.0)
    assert out.to_list() == [1 / 16, 0.0, 0.0, 0.0]


def test_rpow_needs_positive_base():
    with pytest.raises(NonPositiveBaseError):
        jet_rpow(Jet.constant(0.0, -1.0, 3), 0.5)
    with pytest.raises(NonPositiveBaseError):
        jet_rpow(Jet.constant(0.0, 0.0, 3), -1.0)


def test_integer_power_of_zero_base():
    t = Jet.variable(0.0, 4)
    assert jet_rpow(t, 3).to_list() == [0.0, 0.0, 0.0, 1.0, 0.0]


def test_rpow_matches_sympy():
    t = sp.Symbol("t")
    expr = (2 + t + t**2) ** sp.Rational(-2, 3)
    a = Jet(0.5, np.array([2.75, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0]))
    out = jet_rpow(a, -2.0 / 3.0).derivative_values()
    exact = [float(sp.diff(expr, t, k).subs(t, 0.5)) for k in range(7)]
    np.testing.assert_allclose(out, exact, rtol=1e-10, atol=1e-12)


def test_reverse_is_an_involution():
    j = Jet(0.7, np.array([1.0, -2.0, 3.0, -4.0]))
    back = j.reverse().reverse()
    assert back.t0 == j.t0
    np.testing.assert_array_equal(back.c, j.c)
    assert j.reverse(2.0).to_list() == [1.0, 2.0, 3.0, 4.0]


coefficient = st.floats(-0.5, 0.5, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(coefficient, min_size=3, max_size=3),
    st.lists(coefficient, min_size=3, max_size=3),
    st.floats(-1.0, 1.0),
)
def test_product_evaluates_to_product(a, b, h):
    ja = Jet(0.0, np.array(a + [0.0] * 3))
    jb = Jet(0.0, np.array(b + [0.0] * 3))
    # degree 4 fits in K = 5, so nothing is truncated
    assert jet_mul(ja, jb).evaluate(h) == pytest.approx(
        ja.evaluate(h) * jb.evaluate(h), abs=1e-12
    )


@settings(max_examples=50, deadline=None)
@given(st.lists(coefficient, min_size=6, max_size=6))
def test_exp_of_negation_is_inverse(c):
    a = Jet(0.0, np.array(c))
    product = jet_mul(jet_exp(a), jet_exp(-a))
    np.testing.assert_allclose(product.c, [1.0, 0, 0, 0, 0, 0], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.5, 2.0),
    st.lists(coefficient, min_size=5, max_size=5),
    st.floats(0.3, 3.0),
)
def test_rpow_round_trip(a0, rest, r):
    a = Jet(0.0, np.array([a0] + rest))
    back = jet_rpow(jet_rpow(a, r), 1.0 / r)
    np.testing.assert_allclose(back.c, a.c, rtol=1e-8, atol=1e-8)


# --- Closed-form signals ---


def test_constant_signal():
    jet = closed_form_jet("constant", {"value": 0.4}, 1.3, 3)
    assert jet.to_list() == [0.4, 0, 0, 0]


def test_problem1_signal_at_zero():
    jet = closed_form_jet("poly-times-exponential", PROBLEM1, 0.0, 3)
    np.testing.assert_allclose(jet.c, [1.0, 0.0, 10.0, -20.0], rtol=1e-15)


@pytest.mark.parametrize("t0", [0.0, 0.7, 2.0])
def test_problem1_signal_matches_sympy(t0):
    t = sp.Symbol("t")
    expr = 1 + 10 * t**2 * sp.exp(-2 * t)
    jet = closed_form_jet("poly-times-exponential", PROBLEM1, t0, 12)
    exact = np.array([float(sp.diff(expr, t, k).subs(t, t0)) for k in range(13)])
    scale = np.abs(exact).max()
    np.testing.assert_allclose(
        jet.derivative_values(), exact, rtol=1e-10, atol=1e-10 * scale
    )


def test_polynomial_signal():
    jet = signal_jet(PolynomialSignal(coeffs=[1.0, -2.0, 3.0]), 2.0, 3)
    # 1 - 2t + 3t^2 at t = 2: value 9, slope 10, curvature 6
    np.testing.assert_allclose(jet.c, [9.0, 10.0, 3.0, 0.0])


def test_unknown_and_malformed_signals():
    with pytest.raises(UnknownSpecError):
        parse_signal("sinusoid", {"amplitude": 1.0})
    with pytest.raises(MalformedSpecError):
        parse_signal("constant", {})


# --- Gevrey bump ---


def test_normalizer_matches_trapezoid():
    tau = np.linspace(0.0, 3.0, 20001)
    reference = trapezoid(bump_density(tau, 3.0, 1.5), tau)
    assert bump_normalizer(3.0, 1.5) == pytest.approx(reference, rel=1e-8)


def test_bump_density_scalar_and_edges():
    assert bump_density(0.0, 3.0, 1.5) == 0.0
    assert bump_density(3.0, 3.0, 1.5) == 0.0
    assert isinstance(bump_density(1.5, 3.0, 1.5), float)
    assert bump_density(1.5, 3.0, 1.5) == pytest.approx(math.exp(-16.0))


def test_horizon_validation():
    with pytest.raises(NonPositiveParameterError):
        bump_normalizer(0.0, 1.5)
    with pytest.raises(MalformedSpecError):
        bump_normalizer(3.0, 2.5)


def test_psi_endpoint_jets_are_exact(transfer):
    assert psi_jet(0.0, transfer, 8).to_list() == [1.0] + [0.0] * 8
    assert psi_jet(3.0, transfer, 8).to_list() == [0.0] * 9


def test_psi_midpoint(transfer):
    assert psi_jet(1.5, transfer, 4).c[0] == pytest.approx(0.5, abs=1e-13)


def test_psi_symmetry(transfer):
    for t in np.linspace(0.0, 3.0, 101):
        assert psi_value(t, transfer) + psi_value(3.0 - t, transfer) == pytest.approx(
            1.0, abs=1e-12
        )


def test_psi_is_monotone(transfer):
    values = np.array([psi_value(t, transfer) for t in np.linspace(0.0, 3.0, 61)])
    assert np.all(np.diff(values) <= 0.0)
    assert values[0] == 1.0
    assert values[-1] == 0.0


def test_psi_slope_matches_finite_difference(transfer):
    t, h = 1.1, 1e-5
    slope = (psi_value(t + h, transfer) - psi_value(t - h, transfer)) / (2 * h)
    assert psi_jet(t, transfer, 3).c[1] == pytest.approx(slope, rel=1e-6)


def test_psi_derivatives_match_sympy(transfer):
    t = sp.Symbol("t")
    u = t / 3 * (1 - t / 3)
    density = sp.exp(-(u**-2))
    jet = psi_jet(1.0, transfer, 9)
    raw = jet.derivative_values()
    exact = [float(sp.diff(density, t, k).subs(t, 1.0)) for k in range(9)]
    # psi^(k) = -psi_0^(k-1) / C
    scale = max(abs(v) for v in exact)
    np.testing.assert_allclose(
        -raw[1:] * transfer.C_norm, exact, rtol=1e-9, atol=1e-9 * scale
    )


def test_psi_outside_horizon(transfer):
    with pytest.raises(OutOfDomainError):
        psi_jet(3.5, transfer, 4)


# --- Flat parameter ---


def test_steady_parameter_is_constant():
    level = {"kind": "constant", "value": 0.4}
    spec = make_trajectory_spec(3.0, 1.5, level, level)
    for t in np.linspace(0.0, 3.0, 13):
        assert p_jet(float(t), spec, 10).to_list() == [0.4] + [0.0] * 10


def test_parameter_starts_on_p0(transfer):
    start = p_jet(0.0, transfer, 12)
    np.testing.assert_array_equal(start.c, signal_jet(transfer.p0, 0.0, 12).c)


def test_parameter_ends_on_reversed_pT():
    pT = PolynomialSignal(coeffs=[0.1, 0.2, 0.3])
    spec = make_trajectory_spec(3.0, 1.5, ConstantSignal(value=1.0), pT)
    end = p_jet(3.0, spec, 4)
    assert end.t0 == 3.0
    np.testing.assert_array_equal(end.c, [0.1, -0.2, 0.3, 0.0, 0.0])


def test_p_jets_follow_time_order(transfer):
    times = np.linspace(0.0, 3.0, 31)
    jets = p_jets(transfer, times, 6)
    assert [j.t0 for j in jets] == times.tolist()
    assert all(j.K == 6 for j in jets)


def test_parameter_passes_between_endpoints(transfer):
    mid = p_jet(1.5, transfer, 2).c[0]
    p0_mid = signal_jet(transfer.p0, 1.5, 0).c[0]
    # half way the bump weights p0 and the target equally
    assert mid == pytest.approx(0.5 * p0_mid, rel=1e-10)


# --- Growth diagnostic ---


def test_gevrey_constant_of_constant():
    assert gevrey_constant([Jet.constant(0.0, 0.4, 5)], 1.5) == pytest.approx(0.4)


def test_gevrey_constant_of_transfer(transfer):
    jets = p_jets(transfer, np.linspace(0.0, 3.0, 31), 20)
    D = gevrey_constant(jets, 1.5)
    assert np.isfinite(D) and D > 0.0
    for jet in jets:
        log_abs, _ = jet.log_derivatives()
        k = np.arange(jet.K + 1)
        bound = (k + 1) * np.log(D) + 1.5 * np.array([math.lgamma(n + 1) for n in k])
        assert np.all(log_abs <= bound + 1e-9)
