import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from volterra_lab import (
    CarmaShift,
    ConstantOne,
    DomainError,
    ExpShift,
    FbmBracket,
    GammaShift,
    NonIntegrable,
    Tabulated,
    Unsupported,
    kernel_from_config,
    limit_condition,
)
from volterra_lab.kernels import DiagonalKind


# -- eval / deriv_t ------------------------------------------------------------


def test_gamma_nu1_eval(derived):
    assert GammaShift(1, 1).eval(2.0, 1.0) == pytest.approx(derived["gamma11_eval_lag1"], rel=1e-14)


@pytest.mark.parametrize("t,s", [(1.0, 0.0), (0.7, 0.2), (3.0, 2.5)])
def test_fbm_half_is_one(t, s):
    assert FbmBracket(0.5).eval(t, s) == pytest.approx(1.0, abs=1e-14)


def test_constant_one_eval():
    assert ConstantOne().eval(2.0, 1.0) == 1.0


def test_expshift_deriv(derived):
    assert ExpShift(2.0).deriv_t(2.0, 1.0) == pytest.approx(derived["expshift2_deriv_lag1"], rel=1e-14)


def test_constant_one_deriv_is_zero():
    assert ConstantOne().deriv_t(1.5, 0.5) == 0.0


def test_gamma_nu2_deriv_vanishes_at_lag_one(derived):
    assert GammaShift(2, 1).deriv_t(1.0, 0.0) == pytest.approx(derived["gamma21_deriv_lag1"], abs=1e-15)


@pytest.mark.parametrize("H", [0.3, 0.7])
def test_fbm_closed_form_matches_inner_quadrature(H):
    k = FbmBracket(H)
    for t, s in [(1.0, 0.3), (0.5, 0.1), (2.0, 1.99)]:
        assert k.eval(t, s) == pytest.approx(k.eval_quadrature(t, s), rel=1e-8)


def test_eval_rejects_reversed_arguments():
    with pytest.raises(DomainError):
        ExpShift(1.0).eval(0.5, 1.0)


def test_singular_diagonal_eval_raises():
    with pytest.raises(DomainError):
        GammaShift(0.75, 1.0).eval(1.0, 1.0)


def test_invalid_parameters():
    with pytest.raises(DomainError):
        GammaShift(0.5, 1.0)
    with pytest.raises(DomainError):
        GammaShift(1.0, 0.0)
    with pytest.raises(DomainError):
        FbmBracket(1.0)
    with pytest.raises(DomainError):
        CarmaShift(np.array([[0.5]]), np.array([1.0]))


# -- diagonal --------------------------------------------------------------------


@pytest.mark.parametrize(
    "kernel,kind,value",
    [
        (GammaShift(1, 1), DiagonalKind.FINITE, 1.0),
        (GammaShift(2, 1), DiagonalKind.ZERO, 0.0),
        (GammaShift(0.75, 1), DiagonalKind.SINGULAR, None),
        (ExpShift(3.0), DiagonalKind.FINITE, 1.0),
        (ConstantOne(), DiagonalKind.FINITE, 1.0),
        (FbmBracket(0.5), DiagonalKind.FINITE, 1.0),
        (FbmBracket(0.7), DiagonalKind.ZERO, 0.0),
        (FbmBracket(0.3), DiagonalKind.SINGULAR, None),
    ],
)
def test_diagonal_kinds(kernel, kind, value):
    d = kernel.diagonal(0.4)
    assert d.kind is kind
    assert d.value == value


def test_shift_invariance_flags():
    assert ExpShift(1.0).shift_invariant and GammaShift(1, 1).shift_invariant
    assert not FbmBracket(0.7).shift_invariant


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.01, 3.0), st.floats(0.0, 5.0), st.floats(0.01, 5.0),
    st.sampled_from([ExpShift(1.3), GammaShift(0.75, 1.0), GammaShift(2.5, 0.5), ConstantOne()]),
)
def test_shift_invariance_exact(w, s, c, kernel):
    # lag coordinates make the shift exact only up to rounding of (t + c) - (s + c)
    t = s + w
    a = kernel.eval(t, s)
    b = kernel._g(w, s + c)
    assert a == pytest.approx(b, rel=1e-12)


# -- Stieltjes integrals -----------------------------------------------------------


def test_stieltjes_expshift_constant_f(derived):
    val = ExpShift(1.0).stieltjes_integrate(0.0, 1.0, lambda u: np.ones_like(u))
    assert val == pytest.approx(derived["expshift1_stieltjes_one"], rel=1e-10)


def test_stieltjes_constant_one_zero_measure():
    assert ConstantOne().stieltjes_integrate(0.0, 1.0, np.sin) == 0.0


def test_stieltjes_singular_gamma(derived):
    val = GammaShift(0.75, 1.0).stieltjes_integrate(0.5, 1.5, lambda u: u - 0.5)
    assert val == pytest.approx(derived["gamma075_stieltjes_lag"], rel=1e-8)


def test_stieltjes_singular_gamma_needs_vanishing_integrand():
    with pytest.raises(NonIntegrable):
        GammaShift(0.75, 1.0).stieltjes_integrate(0.0, 1.0, lambda u: np.ones_like(u))


@pytest.mark.parametrize("kernel", [ExpShift(0.7), GammaShift(1.0, 2.0), GammaShift(1.6, 1.0), GammaShift(3.0, 1.0)])
def test_stieltjes_matches_density_quadrature(kernel):
    f = lambda u: np.cos(u) + u**2
    s, t = 0.3, 1.4
    ref, _ = integrate.quad(lambda u: f(u) * kernel.deriv_t(u, s), s, t, epsabs=0, epsrel=1e-13, limit=200)
    assert kernel.stieltjes_integrate(s, t, f) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("kernel", [ExpShift(2.0), GammaShift(1.0, 1.0), GammaShift(2.0, 1.0), FbmBracket(0.5)])
def test_fundamental_theorem(kernel):
    s, t = 0.25, 1.25
    val = kernel.stieltjes_integrate(s, t, lambda u: np.ones_like(u))
    expected = kernel.eval(t, s) - kernel.diagonal(s).value
    assert val == pytest.approx(expected, rel=1e-10, abs=1e-14)


def test_density_integrate_expshift(derived):
    val = ExpShift(1.0).density_integrate(0.0, 1.0, lambda u: np.ones_like(u))
    assert val == pytest.approx(derived["expshift1_stieltjes_one"], rel=1e-12)


# -- norms ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kernel,key",
    [
        (GammaShift(1, 1), "gamma11_l2_t1"),
        (GammaShift(2, 1), "gamma21_l2_t1"),
        (GammaShift(0.75, 1), "gamma075_l2_t1"),
        (ExpShift(2.0), "expshift2_l2_t1"),
    ],
)
def test_l2_norm_sq_oracles(kernel, key, derived):
    assert kernel.l2_norm_sq(1.0) == pytest.approx(derived[key], rel=1e-10)


@pytest.mark.parametrize("H", [0.3, 0.5, 0.7])
def test_fbm_l2_is_variance(H):
    assert FbmBracket(H).l2_norm_sq(1.0) == pytest.approx(1.0, rel=1e-10)
    assert FbmBracket(H).l2_norm_sq(0.5) == pytest.approx(0.5 ** (2 * H), rel=1e-10)


def test_constant_one_l2():
    assert ConstantOne().l2_norm_sq(2.0) == 2.0


def test_cell_integral_matches_quad():
    k = GammaShift(0.75, 1.0)
    ref, _ = integrate.quad(lambda w: k._g(w, 0.0), 0.0, 0.01, epsabs=0, epsrel=1e-12)
    assert k.cell_integral(0.0, 0.0, 0.01) == pytest.approx(ref, rel=1e-10)


# -- limit condition ------------------------------------------------------------------


@pytest.mark.parametrize("kernel", [GammaShift(0.55, 1.0), GammaShift(0.75, 1.0), GammaShift(2.0, 1.0), FbmBracket(0.2), FbmBracket(0.8)])
def test_limit_condition_tends_to_zero(kernel):
    # lags 2^-k run from 0.5 down to ~1e-12
    vals = np.abs(limit_condition(kernel, 1.0, s=0.5, k_max=40))
    assert np.all(np.diff(vals[10:]) < 0)
    assert vals[-1] < 1e-4 * vals[9]


# -- CARMA and tabulated -----------------------------------------------------------------


def test_carma_first_order_is_exponential():
    k = CarmaShift.from_coefficients([2.0], [1.0])
    assert k.eval(1.0, 0.0) == pytest.approx(np.exp(-2.0), rel=1e-13)
    assert k.cell_integral(0.0, 0.0, 1.0) == pytest.approx((1 - np.exp(-2.0)) / 2, rel=1e-13)


def test_carma_21_against_eigen_decomposition():
    # A = [[0, 1], [-a2, -a1]], g(w) = b' exp(A w) e_2
    k = CarmaShift.from_coefficients([3.0, 2.0], [1.0, 0.5])
    lam, V = np.linalg.eig(k.A)
    w = 0.8
    ref = (k.b @ (V @ np.diag(np.exp(lam * w)) @ np.linalg.inv(V))[:, 1]).real
    assert k.eval(w, 0.0) == pytest.approx(ref, rel=1e-12)
    assert k.diagonal().value == 0.5


def test_tabulated_from_csv(tmp_path):
    rows = ["t,s,g"]
    for t in np.linspace(0, 1, 11):
        for s in np.linspace(0, 1, 11):
            if s <= t + 1e-12:
                rows.append(f"{float(t)!r},{float(s)!r},{float(np.exp(-(t - s)))!r}")
    p = tmp_path / "kernel.csv"
    p.write_text("\n".join(rows) + "\n")
    k = Tabulated.from_csv(p)
    assert k.eval(0.7, 0.2) == pytest.approx(np.exp(-0.5), rel=1e-12)
    assert k.eval(0.75, 0.2) == pytest.approx(0.5 * (np.exp(-0.5) + np.exp(-0.6)), rel=1e-12)
    assert not k.shift_invariant
    with pytest.raises(Unsupported):
        k.deriv_t(0.7, 0.2)
    kfd = Tabulated.from_csv(p, fd_fallback=True)
    assert kfd.deriv_t(0.75, 0.2) == pytest.approx(-np.exp(-0.55), rel=0.01)


def test_tabulated_missing_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,g\n0,1\n")
    with pytest.raises(DomainError):
        Tabulated.from_csv(p)


def test_kernel_from_config():
    assert kernel_from_config({"family": "GammaShift", "nu": 0.75, "lam": 1.0}) == GammaShift(0.75, 1.0)
    with pytest.raises(DomainError):
        kernel_from_config({"family": "Nope"})
    with pytest.raises(DomainError):
        kernel_from_config({"family": "ExpShift"})
