import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volterra_lab import _quadrature as quad


def test_gauss_legendre_exact_for_polynomials():
    x, w = quad.gauss_legendre(0.0, 2.0, 8)
    assert np.sum(w * x**15) == pytest.approx(2.0**16 / 16, rel=1e-13)


def test_gauss_legendre_broadcasts_intervals():
    x, w = quad.gauss_legendre(np.array([0.0, 1.0]), np.array([1.0, 3.0]), 5)
    assert x.shape == (2, 5)
    np.testing.assert_allclose(w.sum(axis=-1), [1.0, 2.0], rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, -0.05))
def test_graded_rule_with_jacobi_panel_integrates_power_singularity(a):
    # int_0^1 x^a e^x dx against a series oracle
    k = np.arange(60)
    from scipy.special import factorial

    exact = float(np.sum(1.0 / (factorial(k) * (k + a + 1))))
    x, w = quad.graded_rule(0.0, 1.0, "left", alpha=a)
    assert np.sum(x**a * np.exp(x) * w) == pytest.approx(exact, rel=1e-11)


def test_graded_rule_both_sides_log_singularities():
    # int_0^1 log(x) log(1 - x) dx = 2 - pi^2 / 6
    x, w = quad.graded_rule(0.0, 1.0, "both")
    assert np.sum(np.log(x) * np.log1p(-x) * w) == pytest.approx(2 - np.pi**2 / 6, rel=1e-10)


def test_graded_rule_array_endpoints():
    x, w = quad.graded_rule(np.array([0.0, 1.0]), np.array([1.0, 4.0]), "none")
    np.testing.assert_allclose(w.sum(axis=-1), [1.0, 3.0], rtol=1e-14)


def test_integrate_helper_right_side():
    # a right endpoint is graded only down to ~1e-12 in absolute terms
    val = quad.integrate(lambda x: (1 - x) ** -0.5, 0.0, 1.0, side="right", levels=40)
    assert val == pytest.approx(2.0, rel=1e-5)
    # the same integral in the reflected variable is resolved fully
    val = quad.integrate(lambda w: w**-0.5, 0.0, 1.0, side="left", alpha=-0.5)
    assert val == pytest.approx(2.0, rel=1e-11)


def test_grading_exponent():
    assert quad.grading_exponent(0.0) == 2.0
    assert quad.grading_exponent(0.5) == 2.0
    # gamma kernel nu = 0.75: a = -0.25, p = 2 / (2 nu - 1) = 4
    assert quad.grading_exponent(-0.25) == pytest.approx(4.0)


def test_graded_offsets_endpoints():
    off = quad.graded_offsets(8, 3.0)
    assert off[0] == 0.0 and off[-1] == 1.0
    assert np.all(np.diff(off) > 0)


def test_richardson_removes_leading_term():
    f = lambda h: 1.0 + 3.0 * h**2 + 0.5 * h**4
    est, err = quad.richardson(f(0.1), f(0.05))
    # the h^2 term cancels exactly; what is left is the h^4 remainder
    assert est == pytest.approx(1.0 + 0.5 * (4 * 0.05**4 - 0.1**4) / 3, rel=1e-14)
    assert err == pytest.approx(abs(f(0.05) - f(0.1)) / 3)
