"""Second-chaos representation of ``int Y dX`` for Volterra integrands.

With a standard Brownian driver, unit volatility and ``Y(s) = int_0^s h dX``,

    int_0^t Y dX = int_0^t int_0^s (Kt(s, v, t) + Kt(v, s, t)) dB(v) dB(s)
                   + int_0^t Kt(s, s, t) ds

where, writing ``F_v(u) = K_g(h)(u, v)``,

    Kt(s, v, t) = 1{v <= s} K_g(F_v)(t, s) + 1{v > s} int_v^t F_v(u) g(du, s).

For an absolutely continuous ``g(du, s) = phi(u, s) du`` both branches share

    Kt(s, v, t) = 1{v <= s} F_v(s) g(s, s) + int_{max(s, v)}^t F_v(u) phi(u, s) du,

which is what is evaluated here.  The trace term keeps the diagonal
convention ``D_s B(s) = 1``; for ``g = 1`` the result is ``B^2/2 + t/2``.
"""

from dataclasses import dataclass

import numpy as np

from . import _quadrature as quad
from .errors import DomainError, Unsupported, RequiresBrownian, RequiresUnitVolatility, SingularDiagonal
from .integrands import Combination, Constant, ExpDecay, resolve
from .kernels import DiagonalKind, ExpShift
from .kg_operator import exp_decay_values, kg_exp_closed, kg_values
from .path_engine import bounded_kernel, cell_weights, point_weights

__all__ = [
    "KtildeKernel",
    "half_square_chaos",
    "integrate_x_dx",
    "ktilde",
    "pair_matrix",
    "second_chaos_integral",
    "trace_term",
]

# rule for the u-integrals; coarser than the library default, applied per pair
_M, _LEVELS = 10, 20


@dataclass(frozen=True)
class KtildeKernel:
    g: object
    h: object
    t: float

    def __post_init__(self):
        if self.g.diagonal(0.0).kind is DiagonalKind.SINGULAR:
            raise SingularDiagonal(f"{self.g.family}: Kt needs a finite diagonal g(s, s)")
        if not self.g.deriv_exponent > -1.0:
            raise SingularDiagonal(f"{self.g.family}: g(du, s) is not a finite measure")
        object.__setattr__(self, "h", resolve(self.h, self.t))


def _F(kernel, h, u, v, lag=None):
    """``K_g(h)(u, v)`` elementwise for ``u >= v``; ``lag = u - v`` if known exactly."""
    lag = np.asarray(u, float) - np.asarray(v, float) if lag is None else lag
    u, v, lag = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float), np.asarray(lag, float))
    if isinstance(h, Combination):
        return sum(c * _F(kernel, part, u, v, lag) for c, part in h.terms)
    if isinstance(h, Constant):
        return h.c * kernel._g(lag, v)
    if isinstance(h, ExpDecay):
        scale = np.exp(-h.alpha * (h.horizon - u))
        if isinstance(kernel, ExpShift):
            return scale * kg_exp_closed(h.alpha, kernel.alpha, lag)
        flat = exp_decay_values(kernel, h.alpha, u.ravel(), v.ravel(), lag=lag.ravel())
        return scale * flat.reshape(u.shape)
    out = np.empty(u.shape)
    for idx in np.ndindex(u.shape):
        if lag[idx] <= 0.0:
            out[idx] = h(v[idx]) * kernel.diagonal(v[idx]).value
        else:
            out[idx] = kg_values(kernel, h, u[idx], v[idx], lag=lag[idx])[0][0]
    return out


def _diag_g(kernel, s):
    s = np.asarray(s, float)
    if kernel.shift_invariant:
        return np.full(s.shape, kernel.diagonal().value)
    return np.vectorize(lambda x: kernel.diagonal(float(x)).value)(s)


def _tail_integral(kern, s, v, a, alpha):
    """``int_a^t F_v(u) phi(u, s) du`` for arrays ``s, v, a``."""
    g, t = kern.g, kern.t
    # work in lags from a so that u - s and u - v never round to zero
    x, wt = quad.graded_rule(0.0, t - a, "left", m=_M, levels=_LEVELS, alpha=alpha)
    a_, s_, v_ = a[..., None], s[..., None], v[..., None]
    u = a_ + x
    with np.errstate(invalid="ignore"):
        vals = _F(g, kern.h, u, np.broadcast_to(v_, u.shape), (a_ - v_) + x) * g._dg((a_ - s_) + x, s_)
    return np.sum(np.where(wt > 0, vals * wt, 0.0), axis=-1)


def _ktilde_lower(kern, s, v):
    # v <= s
    g = kern.g
    if g.diagonal(0.0).kind is DiagonalKind.ZERO:
        head = 0.0
    else:
        head = _F(g, kern.h, s, v) * _diag_g(g, s)
    return head + _tail_integral(kern, s, v, s, min(g.deriv_exponent, 0.0))


def _ktilde_upper(kern, s, v):
    # v > s: F_v is singular like g(u, v) at u = v
    return _tail_integral(kern, s, v, v, kern.g.lag_exponent)


def ktilde(kern, s, v):
    """``Kt(s, v, t)`` for scalar or array ``s, v`` in ``[0, t]``."""
    s, v = np.broadcast_arrays(np.asarray(s, float), np.asarray(v, float))
    if np.any(s > kern.t) or np.any(v > kern.t) or np.any(s < 0) or np.any(v < 0):
        raise DomainError("ktilde needs 0 <= s, v <= t")
    out = np.empty(s.shape)
    lo = v <= s
    if np.any(lo):
        out[lo] = _ktilde_lower(kern, s[lo], v[lo])
    if np.any(~lo):
        out[~lo] = _ktilde_upper(kern, s[~lo], v[~lo])
    return out if out.ndim else float(out)


def _upper_diag_limit(kern, s):
    """``lim_{v -> s+} Kt(s, v, t) = int_s^t F_s(u) phi(u, s) du``."""
    return _tail_integral(kern, s, s, s, min(kern.g.deriv_exponent, 0.0))


def trace_term(kern, t=None):
    """``int_0^t Kt(s, s, t) ds``."""
    t = kern.t if t is None else float(t)
    if t != kern.t:
        kern = KtildeKernel(kern.g, kern.h, t)
    s, w = quad.graded_rule(0.0, t, "both", m=12, levels=24, alpha=min(kern.g.origin_exponent, 0.0))
    return float(np.sum(ktilde(kern, s, s) * w))


def pair_matrix(kern, grid, J, chunk=64):
    """Symmetric ``G[j, k] = Kt(t_j, t_k, t) + Kt(t_k, t_j, t)`` for ``j, k < J``.

    The diagonal holds the limit from below, ``Kt(s, s, t) + int_s^t F_s(u) phi(u, s) du``,
    used by the within-cell Hermite terms.
    """
    if kern.g.origin_exponent < 0.0:
        raise Unsupported(f"{kern.g.family}: Kt(s, 0, t) diverges, no left-point pair matrix")
    nodes = grid.left_points[:J]
    G = np.zeros((J, J))
    for j0 in range(0, J, chunk):
        rows = np.arange(j0, min(J, j0 + chunk))
        jj, kk = np.meshgrid(rows, np.arange(J), indexing="ij")
        m = kk < jj
        s, v = nodes[jj[m]], nodes[kk[m]]
        G[jj[m], kk[m]] = _ktilde_lower(kern, s, v) + _ktilde_upper(kern, v, s)
    G = G + G.T
    d = nodes
    G[np.arange(J), np.arange(J)] = _ktilde_lower(kern, d, d) + _upper_diag_limit(kern, d)
    return G


def _brownian_increments(path, J):
    sigma = getattr(path, "sigma", None)
    dpath = getattr(path, "driver_path", path)
    if dpath.jump_sizes.size or dpath.extra is not None or dpath.drift != 0.0 or dpath.c2 != 1.0:
        raise RequiresBrownian("chaos representation needs a standard Brownian driver")
    if sigma is not None and np.any(sigma != 1.0):
        raise RequiresUnitVolatility("chaos representation needs sigma == 1")
    return dpath.dB[:J]


def _double_integral(G, dB, dt):
    # sum_{k<j} G_jk dB_j dB_k + 1/2 sum_k G_kk (dB_k^2 - dt)
    lower = np.tril(G, -1)
    return float(dB @ lower @ dB + 0.5 * np.sum(np.diag(G) * (dB * dB - dt)))


def second_chaos_integral(kern, path, t=None, G=None, trace=None):
    """``int_0^t Y dX`` as the discretized double Wiener integral plus the trace term.

    ``path`` is a :class:`~volterra_lab.levy_drivers.DriverPath` or a
    :class:`~volterra_lab.path_engine.VmlvPath`.  Precomputed ``G`` (from
    :func:`pair_matrix`) and ``trace`` may be passed for Monte Carlo loops.
    """
    t = kern.t if t is None else float(t)
    grid = getattr(path, "grid")
    J = grid.node_index(t)
    if t != kern.t:
        kern = KtildeKernel(kern.g, kern.h, t)
    dB = _brownian_increments(path, J)
    G = pair_matrix(kern, grid, J) if G is None else G
    trace = trace_term(kern) if trace is None else trace
    return _double_integral(G, dB, grid.dt) + trace


def integrate_x_dx(g, path, t):
    """``int_0^t X dX`` (``h = 1``)."""
    return second_chaos_integral(KtildeKernel(g, Constant(1.0), t), path, t)


def _noise_row(g, grid, J):
    W = point_weights(g, grid) if bounded_kernel(g) else cell_weights(g, grid)
    return np.array(W[J, :J])


def half_square_chaos(g, path, t):
    """``X(t)^2 / 2`` from its chaos expansion.

    The double integral with kernel ``g(t, s) g(t, v)`` uses the same kernel
    weights as the simulated ``X`` plus within-cell Hermite terms; the
    zeroth chaos is ``l2_norm_sq(t) / 2``.
    """
    grid = path.grid
    J = grid.node_index(t)
    dB = _brownian_increments(path, J)
    w = _noise_row(g, grid, J)
    G = np.outer(w, w)
    return _double_integral(G, dB, grid.dt) + 0.5 * g.l2_norm_sq(grid.nodes[J])
