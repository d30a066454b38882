"""Quadrature building blocks for integrands with algebraic endpoint singularities.

Two families of rules live here:

* composite Gauss-Legendre on geometrically graded panels (hp-style), used
  where an integral has to be accurate to ~1e-12 in one shot;
* algebraically graded node sets ``(k/N)**p`` used by the product
  Stieltjes rule in :mod:`volterra_lab.kernels`, which is paired with one
  Richardson step.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def _leggauss(m):
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a, b, m=8):
    """Gauss-Legendre nodes/weights on each interval ``[a_i, b_i]``.

    ``a`` and ``b`` broadcast; the result has shape ``a.shape + (m,)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, w = _leggauss(m)
    half = 0.5 * (b - a)[..., None]
    mid = 0.5 * (b + a)[..., None]
    return mid + half * x, half * w


def geometric_edges(levels=36, ratio=0.18):
    """Panel edges on [0, 1] refined geometrically toward 0."""
    inner = ratio ** np.arange(levels, 0, -1)
    return np.concatenate(([0.0], inner, [1.0]))


@lru_cache(maxsize=None)
def _jacobi_panel(m, alpha):
    # rule for int_0^1 f(x) dx exact for x**alpha * poly(x); weights absorb x**-alpha
    xi, wi = roots_jacobi(m, 0.0, alpha)
    x = 0.5 * (1.0 + xi)
    return x, wi * 0.5 ** (1.0 + alpha) / x**alpha


def _resolvable(edges, floor=1e-12):
    # 1 - e rounds to 1 for tiny e, so a right endpoint can only be graded down to ~floor;
    # integrate in the reflected (lag) variable when more is needed
    return np.concatenate(([0.0], edges[edges >= floor]))


@lru_cache(maxsize=None)
def _unit_rule(side, m, levels, ratio, alpha=0.0):
    edges = geometric_edges(levels, ratio)
    if side == "left":
        pass
    elif side == "right":
        edges = (1.0 - _resolvable(edges))[::-1]
    elif side == "both":
        half = 0.5 * geometric_edges(levels, ratio)
        edges = np.concatenate((half, (1.0 - _resolvable(half))[::-1][1:]))
    else:
        edges = np.linspace(0.0, 1.0, 5)
    x, w = gauss_legendre(edges[:-1], edges[1:], m)
    if alpha != 0.0 and side in ("left", "both"):
        jx, jw = _jacobi_panel(m, alpha)
        x[0], w[0] = edges[1] * jx, edges[1] * jw
    x, w = x.ravel(), w.ravel()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def graded_rule(a, b, side="left", m=14, levels=36, ratio=0.18, alpha=0.0):
    """Nodes and weights on ``[a, b]`` graded toward a singular endpoint.

    ``side`` is one of ``"left"``, ``"right"``, ``"both"`` or ``"none"``.
    With ``alpha != 0`` the panel touching the left end integrates
    ``(x - a)**alpha * smooth`` exactly (Gauss-Jacobi).
    ``a`` and ``b`` may be arrays; the rule is appended as the last axis.
    """
    x, w = _unit_rule(side, m, levels, ratio, float(alpha))
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    return a + (b - a) * x, (b - a) * w


def integrate(f, a, b, side="left", **kw):
    """Integrate a vectorised ``f`` over ``[a, b]`` with :func:`graded_rule`."""
    x, w = graded_rule(a, b, side, **kw)
    return np.sum(f(x) * w, axis=-1)


def grading_exponent(singular_exponent):
    """Mesh exponent ``p`` for an endpoint behaviour ``w**a``.

    Mirrors ``p = max(2, 2 / (2 nu - 1))`` for the gamma kernel where
    ``a = nu - 1``; non-singular endpoints get ``p = 2``.
    """
    a = float(singular_exponent)
    if a >= 0.0:
        return 2.0
    return max(2.0, 2.0 / (2.0 * a + 1.0))


def graded_offsets(n, p):
    """Unit offsets ``(k/n)**p`` for ``k = 0..n``."""
    return (np.arange(n + 1) / n) ** p


def richardson(coarse, fine, order=2):
    """One Richardson step; returns ``(estimate, error_estimate)``."""
    factor = 2.0 ** order
    est = (factor * fine - coarse) / (factor - 1.0)
    return est, np.abs(fine - coarse) / (factor - 1.0)
