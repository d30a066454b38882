"""Simulation of ``X(t) = int_0^t g(t, s) sigma(s) dL(s)`` on a uniform grid.

Every path is a left-point sum with ``sigma(t_k)`` frozen on cell ``k``.  The
driver increment of a cell splits into parts with their own weights:

* noise (Gaussian part, unresolved small jumps): the point value
  ``g(t_j, t_k)`` when ``g`` is bounded, otherwise the cell average
  ``W[j, k] = (1/dt) int_{t_k}^{t_{k+1}} g(t_j, u) du``;
* rate terms (drift minus compensator): always the exact cell average, so the
  compensator is the exact integral of the left-point-frozen integrand;
* compound-Poisson jumps: the exact ``g(t_j, tau_i)``.
"""

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, NonIntegrable, NotSemimartingale
from .grid import SimulationGrid
from .kernels import DiagonalKind
from .levy_drivers import Brownian, LevyDriver, as_seed_sequence, check_integrability, child_seed
from .volatility import Constant, VolatilityModel

__all__ = [
    "SimulationGrid",
    "VmlvProcess",
    "VmlvPath",
    "bounded_kernel",
    "cell_weights",
    "coarsen_path",
    "path_from_inputs",
    "noise_weights",
    "point_weights",
    "decompose",
    "decomposition_increments",
    "simulate",
    "simulate_batch",
]


def _shift_lag_weights(kernel, grid):
    dt, n = grid.dt, grid.n
    m = np.arange(n)
    return kernel.cell_integral(0.0, m * dt, (m + 1) * dt) / dt


def _toeplitz_rows(lag_w, n):
    # rows j = 0..n; W[j, k] = lag_w[j - 1 - k] for k < j
    j = np.arange(n + 1)[:, None]
    k = np.arange(n)[None, :]
    d = j - 1 - k
    return np.where(d >= 0, lag_w[np.clip(d, 0, n - 1)], 0.0)


def _point_matrix(kernel, grid, fn):
    n, dt = grid.n, grid.dt
    if kernel.shift_invariant:
        return _toeplitz_rows(fn(np.arange(1, n + 1) * dt, 0.0), n)
    W = np.zeros((n + 1, n))
    j, k = np.nonzero(np.tri(n + 1, n, -1))
    W[j, k] = fn((j - k) * dt, k * dt)
    return W


def _cell_matrix(kernel, grid, average):
    n, dt = grid.n, grid.dt
    if kernel.shift_invariant and average is kernel.second_arg_average:
        return _toeplitz_rows(_shift_lag_weights(kernel, grid), n)
    W = np.zeros((n + 1, n))
    j, k = np.nonzero(np.tri(n + 1, n, -1))
    t = j * dt
    W[j, k] = average(t, k * dt, np.minimum((k + 1) * dt, t))
    return W


@lru_cache(maxsize=64)
def _cached_weights(key, kernel, T, n, what):
    grid = SimulationGrid(T, n)
    if what == "g":
        W = _cell_matrix(kernel, grid, kernel.second_arg_average)
    elif what == "phi":
        W = _cell_matrix(kernel, grid, kernel.deriv_second_arg_average)
    elif what == "g-point":
        W = _point_matrix(kernel, grid, kernel._g)
    else:
        W = _point_matrix(kernel, grid, kernel._dg)
    if not np.all(np.isfinite(W)):
        raise NonIntegrable(f"{kernel.family}: non-finite cell weights")
    W.setflags(write=False)
    return W


def cell_weights(kernel, grid):
    """``(n + 1, n)`` matrix of cell-averaged kernel values ``W[j, k]``."""
    return _cached_weights(kernel.key(), kernel, float(grid.T), int(grid.n), "g")


def derivative_weights(kernel, grid):
    """Cell averages of ``dg/dt(t_j, .)`` in the same layout as :func:`cell_weights`."""
    return _cached_weights(kernel.key(), kernel, float(grid.T), int(grid.n), "phi")


def point_weights(kernel, grid, derivative=False):
    """Left-point values ``g(t_j, t_k)`` (or ``dg/dt``) for ``k < j``."""
    what = "phi-point" if derivative else "g-point"
    return _cached_weights(kernel.key(), kernel, float(grid.T), int(grid.n), what)


def bounded_kernel(kernel):
    """True when ``g`` is bounded near the diagonal and at ``s = 0``."""
    return kernel.diagonal(0.0).finite and kernel.lag_exponent >= 0.0 and kernel.origin_exponent == 0.0


def uses_point_weights(process):
    if process.weights == "point":
        return True
    return process.weights == "auto" and bounded_kernel(process.kernel)


def noise_weights(process, grid, derivative=False):
    """Weights applied to the noise part of the driver increments."""
    if uses_point_weights(process):
        return point_weights(process.kernel, grid, derivative)
    if derivative:
        return derivative_weights(process.kernel, grid)
    return cell_weights(process.kernel, grid)


@dataclass(frozen=True)
class VmlvProcess:
    """``X(t) = int_0^t g(t, s) sigma(s) dL(s)``.

    ``weights`` picks the kernel weights for the noise part of the driver:
    ``"point"``, ``"cell"``, or ``"auto"`` (point values for bounded kernels).
    """

    kernel: object
    volatility: VolatilityModel = field(default_factory=Constant)
    driver: LevyDriver = field(default_factory=Brownian)
    T: float | None = None
    weights: str = "auto"

    def __post_init__(self):
        if self.weights not in ("auto", "point", "cell"):
            raise DomainError(f"unknown weights {self.weights!r}")
        if self.weights == "point" and not bounded_kernel(self.kernel):
            raise DomainError(f"{self.kernel.family}: point weights need a bounded kernel")
        if self.T is not None:
            self.check(self.T)

    def integrability(self, t):
        # sigma enters through its (stationary) second moment
        scale = np.sqrt(self.volatility.stationary_mean())
        k = self.kernel
        return check_integrability(self.driver, lambda s: scale * k.eval(t, s), t)

    def check(self, t):
        rep = self.integrability(t)
        if not rep.all_finite:
            raise NonIntegrable(f"integrability fails at t={t}: {', '.join(rep.diverging())}")
        return rep


@dataclass
class VmlvPath:
    grid: SimulationGrid
    X: np.ndarray
    driver_path: object
    sigma: np.ndarray
    seed: object = None

    @property
    def t(self):
        return self.grid.nodes

    def to_csv(self, path):
        dL = self.driver_path.increments()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "X", "sigma", "dL"])
            for k, t in enumerate(self.grid.nodes):
                if k < self.grid.n:
                    w.writerow([repr(float(t)), repr(float(self.X[k])), repr(float(self.sigma[k])), repr(float(dL[k]))])
                else:
                    w.writerow([repr(float(t)), repr(float(self.X[k])), "", ""])


def sample_inputs(process, grid, seed):
    """Driver path and left-point sigma for one path seed."""
    ss = as_seed_sequence(seed)
    rng_l = np.random.default_rng(child_seed(ss, 0))
    rng_s = np.random.default_rng(child_seed(ss, 1))
    dpath = process.driver.sample(grid, rng_l)
    sigma = process.volatility.sample(grid, rng_s, dpath)
    return dpath, sigma


def split_increments(dpath):
    """``(noise, rate)`` parts of the per-cell increments, resolved jumps excluded."""
    g = dpath.grid
    rate = np.full(g.n, (dpath.drift - dpath.compensator_rate) * g.dt)
    noise = np.sqrt(dpath.c2) * dpath.dB
    if dpath.extra is not None:
        noise = noise + dpath.extra
    return noise, rate


def continuous_increments(dpath):
    """Per-cell driver increments excluding resolved jumps."""
    noise, rate = split_increments(dpath)
    return noise + rate


def jump_contribution(kernel_fn, grid, dpath, sigma, rows=None):
    """``sum_i 1{tau_i < t_j} k(t_j, tau_i) sigma(t_{k_i}) z_i`` at nodes ``rows``."""
    rows = np.arange(grid.n + 1) if rows is None else np.asarray(rows)
    if dpath.jump_sizes.size == 0:
        return np.zeros(rows.size)
    tj, tau = np.broadcast_arrays(grid.nodes[rows][:, None], dpath.jump_times[None, :])
    amp = sigma[dpath.jump_cells] * dpath.jump_sizes
    m = tau < tj
    vals = np.zeros(tj.shape)
    if np.any(m):
        vals[m] = kernel_fn(tj[m], tau[m])
    return vals @ amp


def _kernel_fn(kernel):
    return lambda t, s: kernel._g(t - s, s)


@lru_cache(maxsize=256)
def _checked(process, T):
    process.check(T)
    return True


def simulate(process, grid, seed):
    """One path of ``X`` at the grid nodes; pure in ``(process, grid, seed)``."""
    X, inputs = simulate_batch(process, grid, [seed], keep_inputs=True)
    dpath, sigma = inputs[0]
    return VmlvPath(grid, X[0], dpath, sigma, seed)


def simulate_batch(process, grid, seeds, keep_inputs=False):
    """``X`` for a batch of path seeds as a ``(len(seeds), n + 1)`` array.

    Inputs are drawn per seed; the kernel sum is one matrix product over the
    batch, so results are reproducible for a fixed batch composition.
    """
    _checked(process, float(grid.T))
    inputs = [sample_inputs(process, grid, seed) for seed in seeds]
    X = _assemble(process, grid, inputs)
    return (X, inputs) if keep_inputs else X


def _assemble(process, grid, inputs):
    N = np.zeros((len(inputs), grid.n))
    R = np.zeros((len(inputs), grid.n))
    for i, (dpath, sigma) in enumerate(inputs):
        noise, rate = split_increments(dpath)
        N[i], R[i] = sigma * noise, sigma * rate
    X = N @ noise_weights(process, grid).T
    if np.any(R):
        X += R @ cell_weights(process.kernel, grid).T
    kfn = _kernel_fn(process.kernel)
    for i, (dpath, sigma) in enumerate(inputs):
        if dpath.jump_sizes.size:
            X[i] += jump_contribution(kfn, grid, dpath, sigma)
    X[:, 0] = 0.0
    return X


def path_from_inputs(process, grid, dpath, sigma, seed=None):
    """``X`` for given driver increments and left-point ``sigma``."""
    X = _assemble(process, grid, [(dpath, sigma)])[0]
    return VmlvPath(grid, X, dpath, sigma, seed)


def coarsen_path(process, path, factor=2):
    """The same driver realisation on the grid with ``n / factor`` cells."""
    dpath = path.driver_path.coarsen(factor)
    return path_from_inputs(process, dpath.grid, dpath, path.sigma[::factor], path.seed)


@dataclass(frozen=True)
class Decomposition:
    martingale_part: np.ndarray
    drift_part: np.ndarray
    residual: float


def semimartingale_check(kernel):
    """Raise :class:`NotSemimartingale` unless the diagonal and ``dg/dt`` are square integrable."""
    diag = kernel.diagonal(0.0)
    if diag.kind is DiagonalKind.SINGULAR:
        raise NotSemimartingale(f"{kernel.family}: singular diagonal g(s, s)")
    # phi(t, s) ~ (t - s)^deriv_exponent near the diagonal: squared integrable iff exponent > -1/2
    if kernel.deriv_exponent <= -0.5:
        raise NotSemimartingale(
            f"{kernel.family}: dg/dt ~ (t - s)^{kernel.deriv_exponent:g} is not square integrable"
        )
    if kernel.origin_exponent != 0.0:
        raise NotSemimartingale(f"{kernel.family}: kernel is singular at s = 0")


@dataclass(frozen=True)
class DecompositionIncrements:
    """Pieces of the decomposition before summation.

    ``diag_cont[k]`` is ``g(t_k, t_k) sigma(t_k)`` times the continuous
    increment of cell ``k``; ``diag_jumps`` holds ``g(tau_i, tau_i) sigma z_i``
    at ``jump_times``; ``drift_rate[i]`` is the inner integral
    ``int_0^{t_i} phi(t_i, s) sigma(s) dL(s)`` at node ``i``.
    """

    diag_cont: np.ndarray
    jump_times: np.ndarray
    jump_cells: np.ndarray
    diag_jumps: np.ndarray
    drift_rate: np.ndarray


def _diagonal_values(kernel, s):
    if kernel.shift_invariant:
        return np.full(np.shape(s), kernel.diagonal().value)
    return np.array([kernel.diagonal(float(x)).value for x in np.ravel(s)])


def decomposition_increments(process, path):
    kernel = process.kernel
    semimartingale_check(kernel)
    grid, dpath, sigma = path.grid, path.driver_path, path.sigma
    noise, rate = split_increments(dpath)
    xn, xr = sigma * noise, sigma * rate
    diag_cont = _diagonal_values(kernel, grid.left_points) * (xn + xr)
    amp = sigma[dpath.jump_cells] * dpath.jump_sizes
    diag_jumps = _diagonal_values(kernel, dpath.jump_times) * amp
    inner = noise_weights(process, grid, derivative=True) @ xn
    if np.any(xr):
        inner += derivative_weights(kernel, grid) @ xr
    inner += jump_contribution(lambda t, s: kernel._dg(t - s, s), grid, dpath, sigma)
    inner[0] = 0.0
    return DecompositionIncrements(diag_cont, dpath.jump_times, dpath.jump_cells, diag_jumps, inner)


def decompose(process, path):
    """Split ``X = int g(s, s) sigma dL + int_0^t int_0^v phi(v, s) sigma dL dv``, ``phi = dg/dt``.

    Inner integrals weight ``phi(t_i, .)`` the way :func:`simulate` weights ``g``; the outer ``dv``
    integral is a right-point sum.  Returns both parts at the nodes and the
    sup-norm recomposition residual against ``path.X``.
    """
    inc = decomposition_increments(process, path)
    grid = path.grid
    cells = inc.diag_cont + np.bincount(inc.jump_cells, weights=inc.diag_jumps, minlength=grid.n)
    mart = np.concatenate(([0.0], np.cumsum(cells)))
    drift = np.concatenate(([0.0], np.cumsum(inc.drift_rate[1:]) * grid.dt))
    resid = float(np.max(np.abs(mart + drift - path.X)))
    return Decomposition(mart, drift, resid)


def variance_oracle(process, t):
    """``Var X(t) = v int_0^t g(t, s)^2 ds`` for unit volatility and a zero-mean driver."""
    mean_rate, var_rate = process.driver.moments()
    if mean_rate != 0.0 or not isinstance(process.volatility, Constant):
        raise DomainError("variance oracle needs a zero-mean driver and constant volatility")
    return var_rate * process.volatility.value**2 * process.kernel.l2_norm_sq(t)
