import numpy as np
import pytest

from volterra_lab import (
    CompensatedCompoundPoisson,
    ConstantOne,
    DomainError,
    ExpDecay,
    ExpShift,
    FbmBracket,
    GammaShift,
    LevyOU,
    CompoundPoissonPositive,
    PartitionMisaligned,
    RequiresBrownian,
    SimulationGrid,
    StepFunction,
    VmlvProcess,
    indicator,
    integrate_deterministic,
    integrate_scaled,
    integrate_semimartingale,
    integrate_simple,
    kg_exp_closed,
    ou_residual,
    ou_solution,
    simulate,
)
from volterra_lab.anticipative_integral import Method
from volterra_lab.levy_drivers import Exponential, Normal
from volterra_lab.path_engine import coarsen_path

G = SimulationGrid(1.0, 64)
PROCESSES = [
    VmlvProcess(ExpShift(1.0)),
    VmlvProcess(GammaShift(0.75, 1.0)),
    VmlvProcess(FbmBracket(0.7)),
    VmlvProcess(ExpShift(2.0), driver=CompensatedCompoundPoisson(5.0, Normal(0.3, 1.0), c2=0.5)),
    VmlvProcess(GammaShift(2.0, 1.0), LevyOU(1.0, CompoundPoissonPositive(2.0, Exponential(1.0)))),
]
IDS = ["exp", "gamma075", "fbm07", "exp-ccp", "gamma2-sv"]


@pytest.mark.parametrize("proc", PROCESSES, ids=IDS)
def test_constant_integrand_gives_x(proc):
    p = simulate(proc, G, 3)
    for j in (1, 17, 64):
        r = integrate_deterministic(1.0, proc, p, G.nodes[j])
        assert r.method is Method.KG_DETERMINISTIC
        assert r.value == pytest.approx(p.X[j], rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("proc", PROCESSES, ids=IDS)
def test_indicator_gives_increment(proc):
    p = simulate(proc, G, 4)
    u, v = G.nodes[10], G.nodes[41]
    r = integrate_deterministic(indicator(u, v), proc, p, 1.0)
    assert r.value == pytest.approx(p.X[41] - p.X[10], rel=1e-12, abs=1e-14)


def test_exponential_integrand_closed_form_weights():
    alpha, beta = 1.3, 0.6
    proc = VmlvProcess(ExpShift(beta))
    p = simulate(proc, G, 5)
    expected = np.sum(kg_exp_closed(alpha, beta, 1.0 - G.left_points) * p.driver_path.dB)
    assert integrate_deterministic(ExpDecay(alpha), proc, p, 1.0).value == pytest.approx(expected, rel=1e-12)


def _cross_error(proc, path, h):
    nodes = np.linspace(0.125, 1.0, 8)
    return max(
        abs(integrate_deterministic(h, proc, path, t).value - integrate_semimartingale(h, proc, path, t).value)
        for t in nodes
    )


@pytest.mark.parametrize("proc", [PROCESSES[0], PROCESSES[3]], ids=["brownian", "ccp"])
def test_deterministic_vs_semimartingale_converges(proc):
    # alpha != beta; for alpha == beta the right-point sum is exact and both agree to rounding
    h = ExpDecay(2.0)
    errs = np.zeros(3)
    for seed in range(8):
        path = simulate(proc, SimulationGrid(1.0, 512), seed)
        for i in range(3):
            errs[i] += _cross_error(proc, path, h) / 8
            path = coarsen_path(proc, path, 2)
    # errs runs fine to coarse; each halving of dt should roughly halve the mean error
    ratios = errs[1:] / errs[:-1]
    assert np.all((ratios > 1.3) & (ratios < 2.7))


def test_equal_rates_cross_oracle_exact():
    proc = PROCESSES[0]
    p = simulate(proc, G, 9)
    assert _cross_error(proc, p, ExpDecay(1.0)) < 1e-14


# -- simple integrands ----------------------------------------------------------------


def test_simple_single_interval():
    proc = PROCESSES[1]
    p = simulate(proc, G, 6)
    assert integrate_simple([0.0, 1.0], [1.0], p).value == p.X[-1]


def test_simple_deterministic_equals_step_integral():
    proc = PROCESSES[0]
    p = simulate(proc, G, 7)
    part = G.nodes[[0, 8, 20, 33, 64]]
    c = np.array([0.5, -1.0, 2.0, 0.25])
    simple = integrate_simple(part, c, p).value
    step = integrate_deterministic(StepFunction(part, c), proc, p, 1.0).value
    assert simple == pytest.approx(step, rel=1e-8)


def test_simple_adapted_is_forward_riemann_sum():
    proc = PROCESSES[0]
    p = simulate(proc, G, 8)
    idx = np.arange(0, 65, 8)
    val = integrate_simple(G.nodes[idx], p.X[idx[:-1]], p).value
    assert val == pytest.approx(np.sum(p.X[idx[:-1]] * np.diff(p.X[idx])), rel=1e-14)


def test_simple_misaligned_partition():
    p = simulate(PROCESSES[0], G, 0)
    with pytest.raises(PartitionMisaligned):
        integrate_simple([0.0, 0.3], [1.0], p)
    with pytest.raises(DomainError):
        integrate_simple([0.0, 0.5, 1.0], [1.0], p)


def test_scaled_integrand():
    proc = PROCESSES[0]
    p = simulate(proc, G, 1)
    Z = np.tanh(p.X[-1])
    base = integrate_deterministic(ExpDecay(0.5), proc, p, 1.0).value
    assert integrate_scaled(Z, ExpDecay(0.5), proc, p, 1.0).value == pytest.approx(Z * base, rel=1e-15)
    pj = simulate(PROCESSES[3], G, 1)
    with pytest.raises(RequiresBrownian):
        integrate_scaled(Z, ExpDecay(0.5), PROCESSES[3], pj, 1.0)


# -- OU --------------------------------------------------------------------------------------


def test_ou_constant_kernel_is_classical_ou():
    proc = VmlvProcess(ConstantOne())
    p = simulate(proc, G, 2)
    Y = ou_solution(0.8, proc, p)
    dB = p.driver_path.dB
    for j in (5, 40, 64):
        ref = np.sum(np.exp(-0.8 * (G.nodes[j] - G.left_points[:j])) * dB[:j])
        assert Y[j] == pytest.approx(ref, rel=1e-12)


def test_ou_expshift_is_double_exponential():
    proc = VmlvProcess(ExpShift(0.5))
    p = simulate(proc, G, 2)
    Y = ou_solution(1.0, proc, p)
    j = 50
    ref = np.sum(kg_exp_closed(1.0, 0.5, G.nodes[j] - G.left_points[:j]) * p.driver_path.dB[:j])
    assert Y[j] == pytest.approx(ref, rel=1e-12)
    assert Y[j] == pytest.approx(integrate_deterministic(ExpDecay(1.0), proc, p, G.nodes[j]).value, rel=1e-12)


def test_ou_gamma_singular_well_defined():
    proc = VmlvProcess(GammaShift(0.75, 1.0))
    p = simulate(proc, G, 2)
    Y = ou_solution(1.0, proc, p)
    assert np.all(np.isfinite(Y)) and Y[0] == 0.0
    assert Y[-1] == pytest.approx(integrate_deterministic(ExpDecay(1.0), proc, p, 1.0).value, rel=1e-10)


def test_ou_with_jumps_matches_deterministic_integral():
    proc = PROCESSES[3]
    p = simulate(proc, G, 12)
    Y = ou_solution(1.5, proc, p)
    for j in (20, 64):
        assert Y[j] == pytest.approx(integrate_deterministic(ExpDecay(1.5), proc, p, G.nodes[j]).value, rel=1e-10)


def test_ou_residual_exact_arithmetic():
    # Y built from the trapezoid recursion solves the discrete equation exactly
    rng = np.random.default_rng(0)
    X = np.concatenate(([0.0], np.cumsum(rng.normal(size=64))))
    a, dt = 0.7, 1 / 64
    Y = np.zeros_like(X)
    acc = 0.0
    for j in range(1, X.size):
        Y[j] = (X[j] - a * (acc + 0.5 * dt * Y[j - 1])) / (1 + 0.5 * a * dt)
        acc += 0.5 * dt * (Y[j - 1] + Y[j])
    assert ou_residual(Y, X, a, dt) < 1e-13


def test_ou_rejects_nonpositive_alpha():
    p = simulate(PROCESSES[0], G, 0)
    with pytest.raises(DomainError):
        ou_solution(0.0, PROCESSES[0], p)
