import numpy as np
import pytest

from volterra_lab import (
    Brownian,
    CompensatedCompoundPoisson,
    CompoundPoissonPositive,
    DomainError,
    GammaShift,
    GammaSubordinator,
    InverseGaussianSubordinator,
    SimulationGrid,
    TruncatedSeries,
    check_integrability,
    driver_from_config,
    sample_increments,
)
from volterra_lab.levy_drivers import Exponential, Normal, TwoPoint, child_seed, moments

GRID = SimulationGrid(1.0, 2)


def _totals(driver, n_paths, grid=GRID, seed=7):
    rng = np.random.default_rng(seed)
    paths = [driver.sample(grid, rng) for _ in range(n_paths)]
    return np.array([p.increments().sum() for p in paths]), paths


def test_brownian_two_cells():
    p = sample_increments(Brownian(), GRID, 3)
    assert p.dB.shape == (2,)
    assert p.jump_sizes.size == 0
    np.testing.assert_array_equal(p.increments(), p.dB)


def test_brownian_increment_law():
    tot, paths = _totals(Brownian(), 20000)
    cells = np.array([p.dB for p in paths])
    # each cell N(0, 1/2), total N(0, 1)
    assert abs(cells.var() - 0.5) < 3 * 0.5 * np.sqrt(2 / cells.size)
    assert abs(tot.var() - 1.0) < 3 * np.sqrt(2 / tot.size)


def test_ccp_jump_count_and_zero_mean():
    drv = CompensatedCompoundPoisson(2.0, Normal(0.0, 1.0))
    tot, paths = _totals(drv, 100_000)
    counts = np.array([p.jump_sizes.size for p in paths])
    assert abs(counts.mean() - 2.0) < 3 * np.sqrt(2.0 / counts.size)
    assert abs(tot.mean()) < 3 * tot.std(ddof=1) / np.sqrt(tot.size)
    assert abs(tot.var() - 2.0) < 3 * tot.var() * np.sqrt(3.0 / tot.size)


def test_ccp_compensator_recorded_not_subtracted():
    drv = CompensatedCompoundPoisson(3.0, Exponential(2.0))
    p = sample_increments(drv, SimulationGrid(1.0, 8), 11)
    assert p.compensator_rate == pytest.approx(1.5)
    assert np.all(p.jump_sizes > 0)
    assert np.all((p.jump_times > 0) & (p.jump_times < 1))
    assert p.values()[-1] == pytest.approx(p.jump_sizes.sum() - 1.5, rel=1e-12)


@pytest.mark.parametrize(
    "driver",
    [GammaSubordinator(2.0, 0.5), InverseGaussianSubordinator(1.0, 2.0), CompoundPoissonPositive(3.0, Exponential(2.0))],
)
def test_subordinator_increments_nonnegative(driver):
    g = SimulationGrid(1.0, 64)
    for seed in range(20):
        assert np.all(sample_increments(driver, g, seed).increments() >= 0)


@pytest.mark.parametrize(
    "driver,mean_rate",
    [(GammaSubordinator(2.0, 0.5), 1.0), (InverseGaussianSubordinator(1.0, 2.0), 0.5)],
)
def test_subordinator_mean(driver, mean_rate):
    assert moments(driver)[0] == pytest.approx(mean_rate)
    tot, _ = _totals(driver, 20000, SimulationGrid(1.0, 4))
    assert abs(tot.mean() - mean_rate) < 3 * tot.std(ddof=1) / np.sqrt(tot.size)


def test_moments_examples():
    assert moments(Brownian()) == (0.0, 1.0)
    assert moments(CompensatedCompoundPoisson(2.0, Normal(0.0, 1.0))) == pytest.approx((0.0, 2.0))
    assert moments(CompoundPoissonPositive(3.0, Exponential(2.0))) == pytest.approx((1.5, 1.5))


def test_jump_laws():
    assert TwoPoint(1.0, 0.25, -1.0).m1 == pytest.approx(-0.5)
    assert TwoPoint(1.0, 0.25, -1.0).m2 == pytest.approx(1.0)
    assert Exponential(4.0).m2 == pytest.approx(2 / 16)
    with pytest.raises(DomainError):
        CompoundPoissonPositive(1.0, Normal(0.0, 1.0))


def test_truncated_series_variance_rate():
    drv = TruncatedSeries(1.0, 2.0, 0.8, eps=1e-3)
    mean, var = moments(drv)
    assert mean == 0.0
    tot, _ = _totals(drv, 20000, SimulationGrid(1.0, 8))
    assert abs(tot.mean()) < 4 * tot.std(ddof=1) / np.sqrt(tot.size)
    assert abs(tot.var() - var) < 4 * np.sqrt((np.mean((tot - tot.mean()) ** 4) - tot.var() ** 2) / tot.size)


def test_determinism():
    drv = CompensatedCompoundPoisson(5.0, Normal(0.3, 1.0), c2=0.5)
    g = SimulationGrid(2.0, 32)
    a, b = sample_increments(drv, g, 99), sample_increments(drv, g, 99)
    assert a.increments().tobytes() == b.increments().tobytes()
    assert a.jump_times.tobytes() == b.jump_times.tobytes()


def test_child_seeds_independent_of_order():
    s1 = child_seed(5, 3).generate_state(4)
    s2 = child_seed(5, 3).generate_state(4)
    np.testing.assert_array_equal(s1, s2)
    assert not np.array_equal(s1, child_seed(5, 4).generate_state(4))


def test_coarsen_preserves_totals():
    drv = CompensatedCompoundPoisson(5.0, Normal(0.0, 1.0), c2=1.0)
    p = sample_increments(drv, SimulationGrid(1.0, 16), 1)
    c = p.coarsen(4)
    assert c.grid.n == 4
    np.testing.assert_allclose(c.values(), p.values()[::4], rtol=0, atol=1e-13)


# -- integrability ----------------------------------------------------------------


def test_integrability_gamma_brownian(derived):
    k = GammaShift(0.75, 1.0)
    rep = check_integrability(Brownian(), lambda s: k.eval(1.0, s), 1.0)
    assert rep.all_finite
    assert rep.gaussian.value == pytest.approx(derived["gamma075_l2_t1"], rel=1e-5)
    assert rep.jump.value == 0.0 and rep.drift.value == 0.0


def test_integrability_ccp_bounded():
    rep = check_integrability(CompensatedCompoundPoisson(2.0, Normal(0.0, 1.0)), lambda s: np.exp(-(1 - s)), 1.0)
    assert rep.all_finite
    assert all(np.isfinite(c.value) for c in rep.conditions)


def test_integrability_brownian_drift(derived):
    rep = check_integrability(Brownian(1.0, 1.0), lambda s: np.exp(-(1.0 - s)), 1.0)
    assert rep.gaussian.value == pytest.approx(derived["integrability_drift_gaussian"], rel=1e-9)
    assert rep.drift.value == pytest.approx(derived["integrability_drift_drift"], rel=1e-9)


def test_integrability_reports_divergence_without_raising():
    rep = check_integrability(Brownian(), lambda s: (1.0 - s) ** -0.5, 1.0)
    assert not rep.all_finite
    assert "gaussian" in rep.diverging()


def test_integrability_sampled_grid():
    g = SimulationGrid(1.0, 1024)
    phi = np.exp(-(1.0 - g.left_points))
    rep = check_integrability(Brownian(), phi, 1.0, g)
    assert rep.gaussian.value == pytest.approx((1 - np.exp(-2)) / 2, rel=2e-3)


def test_driver_from_config():
    d = driver_from_config({"kind": "CompensatedCompoundPoisson", "rate": 2.0, "jump_law": {"law": "Normal", "mean": 0.0, "sd": 1.0}})
    assert isinstance(d, CompensatedCompoundPoisson) and d.rate == 2.0
    with pytest.raises(DomainError):
        driver_from_config({"kind": "Stable"})
