import numpy as np
import pytest

from volterra_lab import (
    CompoundPoissonPositive,
    DomainError,
    LevyOU,
    SimulationGrid,
    TwoSidedStationaryOU,
    sample_sigma_path,
    stationary_mean,
)
from volterra_lab.levy_drivers import DriverPath, Exponential, TwoPoint
from volterra_lab.volatility import Constant, Initial, volatility_from_config

SUB = CompoundPoissonPositive(2.0, Exponential(4.0))


def test_constant_volatility():
    g = SimulationGrid(1.0, 8)
    np.testing.assert_array_equal(sample_sigma_path(Constant(1.0), g, 0), np.ones(8))


def test_stationary_mean_examples():
    assert stationary_mean(LevyOU(2.0, CompoundPoissonPositive(4.0, Exponential(1.0)))) == pytest.approx(2.0)
    assert stationary_mean(Constant(3.0)) == 9.0
    assert stationary_mean(LevyOU(1.0, CompoundPoissonPositive(1.0, TwoPoint(1.0, 1.0, 0.0)))) == pytest.approx(1.0)


def test_levy_ou_from_zero_mean_curve():
    model = LevyOU(1.0, SUB, Initial.ZERO)
    g = SimulationGrid(1.0, 8)
    rng = np.random.default_rng(1)
    s2 = np.array([model.sample_sigma2(g, rng) for _ in range(40000)])
    expected = 0.5 * (1 - np.exp(-g.nodes))
    se = s2.std(axis=0, ddof=1) / np.sqrt(s2.shape[0])
    assert np.all(np.abs(s2.mean(axis=0) - expected) <= 3 * se + 1e-15)


def test_two_sided_stationary_mean():
    model = TwoSidedStationaryOU(1.0, SUB, burn_in=20.0)
    g = SimulationGrid(1.0, 4)
    rng = np.random.default_rng(2)
    s2 = np.array([model.sample_sigma2(g, rng) for _ in range(20000)])
    se = s2.std(axis=0, ddof=1) / np.sqrt(s2.shape[0])
    assert np.all(np.abs(s2.mean(axis=0) - 0.5) <= 3 * se)
    assert model.metadata["tail_bound"] == pytest.approx(np.exp(-20) * 0.5)


def test_nonnegative_every_path():
    model = TwoSidedStationaryOU(2.0, SUB)
    g = SimulationGrid(2.0, 64)
    for seed in range(50):
        assert np.all(sample_sigma_path(model, g, seed) >= 0)


def test_predictability():
    # moving a jump around inside cell k changes sigma only from t_{k+1} on
    model = LevyOU(1.0, SUB, shared_jumps=True)
    g = SimulationGrid(1.0, 8)

    def sigma(times):
        path = DriverPath(g, 0.0, np.zeros(8), np.array(times), np.array([1.0, 2.0]))
        return model.sample(g, np.random.default_rng(0), path)

    a, b = sigma([0.30, 0.55]), sigma([0.30, 0.60])
    k = 4  # both 0.55 and 0.60 lie in [0.5, 0.625)
    np.testing.assert_array_equal(a[: k + 1], b[: k + 1])
    assert not np.array_equal(a, b) or a.size == k + 1


def test_levy_ou_rejects_bad_parameters():
    with pytest.raises(DomainError):
        LevyOU(0.0, SUB)
    with pytest.raises(DomainError):
        LevyOU(1.0, SUB, burn_in=-1.0)


def test_volatility_from_config():
    m = volatility_from_config({
        "kind": "LevyOU", "beta": 1.0, "initial": "Stationary",
        "subordinator": {"kind": "Subordinator", "family": "CompoundPoissonPositive", "rate": 2.0,
                         "jump_law": {"law": "Exponential", "rate": 4.0}},
    })
    assert isinstance(m, LevyOU) and m.initial is Initial.STATIONARY
    assert m.stationary_mean() == pytest.approx(0.5)
