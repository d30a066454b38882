"""Pathwise evaluation of ``int_0^t Y dX`` in the computable regimes.

For deterministic ``h`` the Malliavin terms vanish and

    int_0^t h dX = int_0^t K_g(h)(t, s) sigma(s) dL(s),

a VMLV evaluation with kernel ``K_g(h)``.  The integrand ``K_g(h)(t, .) sigma``
is adapted, so the left-point sum is the right discretisation.  ``K_g(h)``
is weighted exactly as :mod:`volterra_lab.path_engine` weights ``g``: point
values ``K_g(h)(t, t_k)`` or cell averages on the noise, cell averages on the
rate terms and exact values at the jumps.  With matching weights the
structural rules (``h = 1``, indicators, restriction) hold on every path to
rounding.
"""

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import lfilter

from . import _quadrature as quad
from .errors import DomainError, RequiresBrownian
from .grid import SimulationGrid
from .integrands import Combination, Constant, ExpDecay, StepFunction, resolve
from .kg_operator import exp_decay_values, kg_values
from .path_engine import (
    cell_weights,
    decomposition_increments,
    jump_contribution,
    point_weights,
    split_increments,
    uses_point_weights,
)


class Method(enum.Enum):
    KG_DETERMINISTIC = "KgDeterministic"
    SIMPLE_SUM = "SimpleSum"
    SEMIMARTINGALE_PATHWISE = "SemimartingalePathwise"


@dataclass(frozen=True)
class IntegralResult:
    value: float
    method: Method
    grid: SimulationGrid


# ---------------------------------------------------------------------------
# cell averages of K_g(h)(t, .)


def _exp_lag_primitive(kernel, alpha, dt, n):
    """``E(m dt) = int_0^{m dt} exp(-alpha (m dt - u)) g(u) du`` for ``m = 0..n`` (shift kernels)."""
    m = np.arange(n)
    lo, hi = m * dt, (m + 1) * dt
    x, wt = quad.gauss_legendre(lo[1:], hi[1:], 10)
    cells = np.empty(n)
    cells[1:] = np.sum(np.exp(-alpha * (hi[1:, None] - x)) * kernel._g(x, 0.0) * wt, axis=-1)
    x0, w0 = quad.graded_rule(0.0, dt, "left", m=16, levels=24, alpha=kernel.lag_exponent)
    cells[0] = np.sum(np.exp(-alpha * (dt - x0)) * kernel._g(x0, 0.0) * w0)
    E, _ = lfilter([1.0], [1.0, -np.exp(-alpha * dt)], cells, zi=[0.0])
    return np.concatenate(([0.0], E))


@lru_cache(maxsize=64)
def _exp_lag_averages(key, kernel, alpha, dt, n):
    # K_g(h)(t, s) = E'(t - s) for h(u) = exp(-alpha (t - u)), so cell averages are differences of E
    E = _exp_lag_primitive(kernel, alpha, dt, n)
    out = np.diff(E) / dt
    out.setflags(write=False)
    return out


def _row_of_partial(kernel, grid, edge):
    """Cell averages of ``s -> g(edge, s) 1{s < edge}``."""
    n, dt = grid.n, grid.dt
    if edge <= 0.0:
        return np.zeros(n)
    x = edge / dt
    j = int(round(x))
    if abs(x - j) <= 1e-9 and j <= n:
        return np.array(cell_weights(kernel, grid)[j])
    out = np.zeros(n)
    k_full = int(np.floor(x))
    k = np.arange(k_full)
    if k_full:
        out[:k_full] = kernel.second_arg_average(np.full(k_full, edge), k * dt, (k + 1) * dt)
    if k_full < n:
        lo = k_full * dt
        out[k_full] = kernel.second_arg_average(edge, lo, edge) * (edge - lo) / dt
    return out


def _generic_row(kernel, grid, J, point_fn, exponent):
    dt, t = grid.dt, grid.nodes[J]
    k = np.arange(J)

    def fn(w, s):
        w, s = np.broadcast_arrays(w, s)
        return point_fn(s.ravel(), w.ravel()).reshape(s.shape)

    out = np.zeros(grid.n)
    out[:J] = kernel._second_arg_quadrature(fn, np.full(J, t), k * dt, (k + 1) * dt, exponent)
    return out


def kg_cell_row(kernel, h, grid, J):
    """Cell averages of ``s -> K_g(h)(t_J, s)``, ``h`` already bound to ``t_J``."""
    t = grid.nodes[J]
    if J == 0:
        return np.zeros(grid.n)
    if isinstance(h, Combination):
        return sum(c * kg_cell_row(kernel, part, grid, J) for c, part in h.terms)
    if isinstance(h, Constant):
        return h.c * np.array(cell_weights(kernel, grid)[J])
    if isinstance(h, StepFunction):
        row = np.zeros(grid.n)
        for a, b, c in h.pieces():
            row += c * (_row_of_partial(kernel, grid, min(b, t)) - _row_of_partial(kernel, grid, min(a, t)))
        return row
    if isinstance(h, ExpDecay):
        scale = np.exp(-h.alpha * (h.horizon - t))
        if kernel.shift_invariant:
            lagavg = _exp_lag_averages(kernel.key(), kernel, float(h.alpha), grid.dt, grid.n)
            row = np.zeros(grid.n)
            row[:J] = lagavg[:J][::-1]
            return scale * row
        return scale * _generic_row(
            kernel, grid, J, lambda s, w: exp_decay_values(kernel, h.alpha, t, s, lag=w), kernel.lag_exponent
        )
    return _generic_row(kernel, grid, J, lambda s, w: kg_values(kernel, h, t, s, lag=w)[0], kernel.lag_exponent)


def kg_point_row(kernel, h, grid, J):
    """``K_g(h)(t_J, t_k)`` for ``k < J``, zero elsewhere."""
    row = np.zeros(grid.n)
    if J == 0:
        return row
    if isinstance(h, Constant):
        return h.c * np.array(point_weights(kernel, grid)[J])
    row[:J] = kg_point_values(kernel, h, grid.nodes[J], grid.left_points[:J])
    return row


def kg_noise_row(process, h, grid, J):
    if uses_point_weights(process):
        return kg_point_row(process.kernel, h, grid, J)
    return kg_cell_row(process.kernel, h, grid, J)


def kg_point_values(kernel, h, t, s):
    """Pointwise ``K_g(h)(t, s)`` for an array ``s < t`` with the fastest exact route."""
    s = np.atleast_1d(np.asarray(s, float))
    if s.size == 0:
        return s
    if isinstance(h, Combination):
        return sum(c * kg_point_values(kernel, part, t, s) for c, part in h.terms)
    if isinstance(h, Constant):
        return h.c * kernel._g(t - s, s)
    if isinstance(h, ExpDecay):
        return np.exp(-h.alpha * (h.horizon - t)) * exp_decay_values(kernel, h.alpha, t, s)
    return kg_values(kernel, h, t, s)[0]


# ---------------------------------------------------------------------------
# integrals


def _amplitudes(path):
    noise, rate = split_increments(path.driver_path)
    return path.sigma * noise, path.sigma * rate


def integrate_deterministic(h, process, path, t):
    """``int_0^t h dX`` for deterministic ``h`` and a grid node ``t``."""
    grid = path.grid
    J = grid.node_index(t)
    t = grid.nodes[J]
    h = resolve(h, t)
    kernel = process.kernel
    xn, xr = _amplitudes(path)
    value = float(kg_noise_row(process, h, grid, J) @ xn)
    if np.any(xr):
        value += float(kg_cell_row(kernel, h, grid, J) @ xr)
    d = path.driver_path
    m = d.jump_times < t
    if np.any(m):
        amp = path.sigma[d.jump_cells[m]] * d.jump_sizes[m]
        value += float(np.sum(kg_point_values(kernel, h, t, d.jump_times[m]) * amp))
    return IntegralResult(value, Method.KG_DETERMINISTIC, grid)


def integrate_simple(partition, Z, path):
    """``sum_i Z_i (X(t_{i+1}) - X(t_i))`` for a partition of grid nodes."""
    partition = np.asarray(partition, float)
    Z = np.asarray(Z, float)
    if partition.ndim != 1 or Z.shape != (partition.size - 1,):
        raise DomainError("need len(Z) == len(partition) - 1")
    if np.any(np.diff(partition) <= 0):
        raise DomainError("partition must be strictly increasing")
    idx = np.array([path.grid.node_index(p) for p in partition])
    return IntegralResult(float(np.sum(Z * np.diff(path.X[idx]))), Method.SIMPLE_SUM, path.grid)


def integrate_semimartingale(h, process, path, t):
    """``int h dX`` through the semimartingale decomposition, pathwise Riemann-Stieltjes.

    Martingale increments are weighted with ``h`` at the left point (jumps at
    their own times) and the absolutely continuous part with ``h`` at the
    right point, matching the sums in :func:`path_engine.decompose`.
    """
    grid = path.grid
    J = grid.node_index(t)
    t = grid.nodes[J]
    h = resolve(h, t)
    inc = decomposition_increments(process, path)
    left = grid.left_points[:J]
    value = np.sum(np.asarray(h(left), float) * inc.diag_cont[:J])
    m = inc.jump_times < t
    if np.any(m):
        value += np.sum(np.asarray(h(inc.jump_times[m]), float) * inc.diag_jumps[m])
    right = grid.nodes[1 : J + 1]
    value += grid.dt * np.sum(np.asarray(h(right), float) * inc.drift_rate[1 : J + 1])
    return IntegralResult(float(value), Method.SEMIMARTINGALE_PATHWISE, grid)


def integrate_scaled(Z, h, process, path, t):
    """``int Z h dX = Z int h dX`` for a per-path constant ``Z`` (Brownian drivers only)."""
    if not process.driver.is_brownian:
        raise RequiresBrownian("the bounded-factor rule is implemented for Brownian drivers only")
    base = integrate_deterministic(h, process, path, t)
    return IntegralResult(float(Z) * base.value, base.method, base.grid)


# ---------------------------------------------------------------------------
# OU equation driven by X


def _toeplitz(lag_vals, n):
    j = np.arange(n + 1)[:, None]
    k = np.arange(n)[None, :]
    d = j - 1 - k
    return np.where(d >= 0, lag_vals[np.clip(d, 0, n - 1)], 0.0)


def ou_kernel_matrix(kernel, alpha, grid, point=False):
    """``(n + 1, n)`` weights of ``K_g(exp(-alpha (t_j - .)))(t_j, .)``.

    Cell averages by default; ``point=True`` gives the left-point values.
    """
    n, dt = grid.n, grid.dt
    if kernel.shift_invariant:
        if point:
            lags = np.arange(1, n + 1) * dt
            return _toeplitz(exp_decay_values(kernel, alpha, lags, np.zeros(n)), n)
        return _toeplitz(_exp_lag_averages(kernel.key(), kernel, float(alpha), dt, n), n)
    K = np.zeros((n + 1, n))
    for J in range(1, n + 1):
        h = ExpDecay(alpha, grid.nodes[J])
        K[J] = kg_point_row(kernel, h, grid, J) if point else kg_cell_row(kernel, h, grid, J)
    return K


def ou_solution(alpha, process, path):
    """``Y(t_j) = int_0^{t_j} exp(-alpha (t_j - s)) dX(s)`` at every node."""
    if not alpha > 0:
        raise DomainError("ou_solution needs alpha > 0")
    grid = path.grid
    kernel = process.kernel
    xn, xr = _amplitudes(path)
    Y = ou_kernel_matrix(kernel, alpha, grid, point=uses_point_weights(process)) @ xn
    if np.any(xr):
        Y = Y + ou_kernel_matrix(kernel, alpha, grid) @ xr
    d = path.driver_path
    if d.jump_sizes.size:
        Y = Y + jump_contribution(
            lambda t, s: exp_decay_values(kernel, alpha, t, s), grid, d, path.sigma
        )
    Y[0] = 0.0
    return Y


def ou_residual(Y, X, alpha, dt):
    """``max_j |Y(t_j) + alpha int_0^{t_j} Y ds - X(t_j)|`` with the trapezoid rule."""
    Y = np.asarray(Y, float)
    X = np.asarray(X, float)
    integral = np.concatenate(([0.0], np.cumsum(0.5 * (Y[1:] + Y[:-1])) * dt))
    return float(np.max(np.abs(Y + alpha * integral - X)))


__all__ = [
    "IntegralResult",
    "Method",
    "integrate_deterministic",
    "integrate_scaled",
    "integrate_semimartingale",
    "integrate_simple",
    "kg_cell_row",
    "kg_point_row",
    "ou_kernel_matrix",
    "ou_residual",
    "ou_solution",
]
