"""The kernel transform ``K_g``.

For a deterministic ``h``,

    K_g(h)(t, s) = h(s) g(t, s) + int_s^t (h(u) - h(s)) g(du, s),

so that ``int h dX = int K_g(h)(t, s) sigma(s) dL(s)``.  Three numerical
schemes are offered: the form above (``SINGULAR_SAFE``, valid on singular
diagonals for Lipschitz ``h``), the diagonal form
``h(s) g(s, s) + int h(u) g(du, s)`` and the density form using
``dg/du``.  Exponential pairs have a closed form.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import _quadrature as quad
from .errors import (
    DomainError,
    NonIntegrable,
    NotLipschitz,
    NotShiftInvariant,
    SchemeUnavailable,
    Unsupported,
)
from .integrands import Combination, Constant, ExpDecay, StepFunction, resolve
from .kernels import ConstantOne, ExpShift


class Scheme(enum.Enum):
    SINGULAR_SAFE = "SingularSafe"
    DIAGONAL_FORM = "DiagonalForm"
    ABS_CONTINUOUS = "AbsContinuousForm"
    CLOSED_FORM = "ClosedForm"


@dataclass(frozen=True)
class KgEvaluation:
    value: float
    scheme: Scheme
    err_estimate: float

    def to_dict(self):
        return {"value": self.value, "scheme": self.scheme.value, "err_estimate": self.err_estimate}


def kg_exp_closed(alpha, beta, tau):
    """``K_g(h)(t, s)`` for ``g = exp(-beta (t-s))``, ``h(u) = exp(-alpha (t-u))``, ``tau = t - s``.

    Written as ``e^{-alpha tau} - beta tau e^{-beta tau} phi((alpha - beta) tau)`` with
    ``phi(x) = (1 - e^{-x}) / x`` so the equal-rate limit needs no special case.
    """
    alpha, beta, tau = np.broadcast_arrays(*(np.asarray(a, float) for a in (alpha, beta, tau)))
    x = (alpha - beta) * tau
    small = np.abs(x) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        phi = np.where(small, 1.0, -np.expm1(-x) / np.where(small, 1.0, x))
        out = np.exp(-alpha * tau) - beta * tau * np.exp(-beta * tau) * phi
        # far below the diagonal alpha << beta the product above can overflow
        direct = (alpha * np.exp(-alpha * tau) - beta * np.exp(-beta * tau)) / (alpha - beta)
    out = np.where(x < -500.0, direct, out)
    return out[()] if out.ndim == 0 else out


def _probe_lipschitz(h, s, lag, certificate):
    if certificate is not None or getattr(h, "lipschitz", None) is not None:
        return
    s = np.atleast_1d(np.asarray(s, float))
    d1 = np.minimum(1e-3, 0.25 * np.asarray(lag, float))
    d2 = 1e-2 * d1
    hs = np.asarray(h(s), float)
    q1 = np.abs(np.asarray(h(s + d1), float) - hs) / d1
    q2 = np.abs(np.asarray(h(s + d2), float) - hs) / d2
    # a Lipschitz h keeps the quotient bounded; |u - s|^a with a < 3/4 grows by > 3 over 100x
    bad = q2 > 3.0 * q1 + 1e-9
    if np.any(bad):
        raise NotLipschitz(
            f"h is not Lipschitz at s={s[bad][0]!r} (difference quotients {q1[bad][0]:.3g} -> {q2[bad][0]:.3g})"
        )


def _step_values(kernel, h, t, s):
    # K_g(1_[a,b))(t, s) = g(b', s) 1{s < b'} - g(a', s) 1{s < a'},  a' = min(a, t), b' = min(b, t)
    out = np.zeros(np.shape(s))
    for a, b, c in h.pieces():
        if c == 0.0:
            continue
        for edge, sign in ((min(b, t), 1.0), (min(a, t), -1.0)):
            m = s < edge
            if np.any(m):
                out[m] += sign * c * kernel._g(edge - s[m], s[m])
    return out


def exp_decay_values(kernel, alpha, t, s, lag=None):
    """``K_g(h)(t, s)`` for ``h(u) = exp(-alpha (t - u))`` via integration by parts.

    ``int_s^t (h(u) - h(s)) g(du, s)`` integrated by parts (the boundary term
    at ``u = s`` vanishes under the limit condition) leaves

        K_g(h)(t, s) = g(t, s) - alpha int_s^t exp(-alpha (t - u)) g(u, s) du,

    which needs only ordinary integrals of ``g``.
    """
    s = np.atleast_1d(np.asarray(s, float))
    lag = t - s if lag is None else np.atleast_1d(np.asarray(lag, float))
    w, wt = quad.graded_rule(0.0, lag, "left", m=16, levels=24, alpha=kernel.lag_exponent)
    inner = np.sum(np.exp(-alpha * (lag[:, None] - w)) * kernel._g(w, s[:, None]) * wt, axis=-1)
    return kernel._g(lag, s) - alpha * inner


def _density_rule(lag, m, alpha, pieces=64):
    # graded first piece at the diagonal, plain Gauss-Legendre on the rest so
    # that kinks in h away from s are resolved as well
    edges = lag[:, None] * np.linspace(0.0, 1.0, pieces + 1)
    w0, wt0 = quad.graded_rule(0.0, edges[:, 1], "left", m=m, alpha=alpha)
    w1, wt1 = quad.gauss_legendre(edges[:, 1:-1], edges[:, 2:], m)
    n = lag.size
    return (np.concatenate((w0, w1.reshape(n, -1)), axis=1),
            np.concatenate((wt0, wt1.reshape(n, -1)), axis=1))


def _stieltjes_pair(kernel, s, lag, fvals, n):
    coarse = kernel._product_stieltjes(s, lag, fvals, n)
    fine = kernel._product_stieltjes(s, lag, fvals, 2 * n)
    est, err = quad.richardson(coarse, fine)
    bad = ~np.isfinite(est) | (np.abs(fine - coarse) > 1e-4 * np.maximum(np.abs(fine), 1.0))
    if np.any(bad):
        raise NonIntegrable(f"{kernel.family}: Stieltjes estimate did not settle")
    return est, err


def kg_values(kernel, h, t, s, scheme=Scheme.SINGULAR_SAFE, lipschitz=None, n=None, chunk=64, lag=None):
    """Vectorised ``K_g(h)(t, s)`` over an array ``s`` (all ``< t``); returns ``(values, errors)``.

    ``lag`` may carry ``t - s`` at full precision when ``s`` is within
    rounding of ``t``.
    """
    scheme = Scheme(scheme)
    s = np.atleast_1d(np.asarray(s, float))
    lag = t - s if lag is None else np.atleast_1d(np.asarray(lag, float))
    if np.any(lag <= 0) or np.any(s < 0):
        raise DomainError("K_g(h)(t, s) needs 0 <= s < t")
    h = resolve(h, t)
    if isinstance(h, Combination):
        vals = np.zeros(s.shape)
        errs = np.zeros(s.shape)
        for c, part in h.terms:
            v, e = kg_values(kernel, part, t, s, scheme, lipschitz, n, chunk, lag)
            vals += c * v
            errs += abs(c) * e
        return vals, errs
    if isinstance(h, StepFunction):
        return _step_values(kernel, h, t, s), np.zeros(s.shape)

    if scheme is Scheme.CLOSED_FORM:
        if isinstance(kernel, ConstantOne):
            return np.asarray(h(s), float), np.zeros(s.shape)
        if isinstance(h, Constant):
            return h.c * kernel._g(lag, s), np.zeros(s.shape)
        if isinstance(kernel, ExpShift) and isinstance(h, ExpDecay):
            scale = np.exp(-h.alpha * (h.horizon - t))
            return scale * kg_exp_closed(h.alpha, kernel.alpha, lag), np.zeros(s.shape)
        raise SchemeUnavailable(f"no closed form for {kernel.family} with {type(h).__name__}")

    diag = kernel.diagonal(float(s[0]))
    if scheme is not Scheme.SINGULAR_SAFE and not diag.finite:
        raise SchemeUnavailable(f"{scheme.value} needs a finite diagonal; {kernel.family} is singular")
    if not diag.finite:
        _probe_lipschitz(h, s, lag, lipschitz)
    n = n or kernel.stieltjes_nodes
    vals = np.empty(s.shape)
    errs = np.empty(s.shape)
    for lo in range(0, s.size, chunk):
        sl = slice(lo, lo + chunk)
        sc, lc = s[sl], lag[sl]
        hs = np.asarray(h(sc), float)
        if scheme is Scheme.SINGULAR_SAFE:
            est, err = _stieltjes_pair(
                kernel, sc, lc, lambda w: np.asarray(h(sc[:, None] + w), float) - hs[:, None], n
            )
            vals[sl] = hs * kernel._g(lc, sc) + est
            errs[sl] = err
        elif scheme is Scheme.DIAGONAL_FORM:
            g0 = np.array([kernel.diagonal(float(x)).value for x in sc])
            est, err = _stieltjes_pair(kernel, sc, lc, lambda w: np.asarray(h(sc[:, None] + w), float), n)
            vals[sl] = hs * g0 + est
            errs[sl] = err
        else:
            if kernel.deriv_exponent <= -1.0:
                raise SchemeUnavailable(f"{kernel.family}: dg/du is not integrable at the diagonal")
            g0 = np.array([kernel.diagonal(float(x)).value for x in sc])
            try:
                parts = []
                for m in (12, 16):
                    w, wt = _density_rule(lc, m, kernel.deriv_exponent)
                    dens = kernel._dg(w, sc[:, None])
                    parts.append(np.sum(np.asarray(h(sc[:, None] + w), float) * dens * wt, axis=-1))
            except Unsupported as exc:
                raise SchemeUnavailable(str(exc)) from None
            vals[sl] = hs * g0 + parts[1]
            errs[sl] = np.abs(parts[1] - parts[0])
    return vals, errs


def kg_apply(kernel, h, t, s, scheme=Scheme.SINGULAR_SAFE, lipschitz=None, n=None):
    """``K_g(h)(t, s)`` for scalar ``s < t`` as a :class:`KgEvaluation`."""
    if not s < t:
        raise DomainError(f"K_g(h)(t, s) needs s < t, got s={s}, t={t}")
    scheme = Scheme(scheme)
    val, err = kg_values(kernel, h, t, np.array([float(s)]), scheme, lipschitz, n)
    return KgEvaluation(float(val[0]), scheme, float(err[0]))


def kg_shift(kernel, h, tau, s=0.0, n=None):
    """Shift-kernel form ``h(s) g(tau) + int_0^tau (h(s + u) - h(s)) g(du)``."""
    if not kernel.shift_invariant:
        raise NotShiftInvariant(f"{kernel.family} is not a shift kernel")
    if not tau > 0:
        raise DomainError("kg_shift needs tau > 0")
    h = resolve(h, s + tau)
    if isinstance(kernel, ConstantOne):
        return float(np.asarray(h(np.array([s])), float)[0])
    if not kernel.diagonal().finite:
        _probe_lipschitz(h, np.array([s]), np.array([tau]), None)
    hs = float(np.asarray(h(np.array([s])), float)[0])
    est, _ = _stieltjes_pair(
        kernel, np.array([s]), np.array([tau]),
        lambda w: np.asarray(h(s + w), float) - hs, n or kernel.stieltjes_nodes,
    )
    return float(hs * kernel._g(np.array([tau]), s)[0] + est[0])


def _resolvent_parts(kernel, alpha, s, t, n):
    # K(u, s) = e^{-alpha (u - s)} (g(u, s) + C(u)),  C(u) = int_s^u (e^{alpha (v - s)} - 1) g(dv, s),
    # for the horizon-u integrand h_u(v) = e^{-alpha (u - v)}; C is accumulated cell by cell on
    # the graded mesh and the outer integral uses the same mesh
    tau = t - s
    sv = np.array([[s]])
    w = quad.graded_offsets(n, kernel.grading)[None, :] * tau
    f = np.expm1(alpha * w)
    gv = kernel._g(w[:, 1:], sv)
    G = kernel.cell_integral(sv, w[:, :-1], w[:, 1:])
    cell = np.diff(w, axis=1)
    terms = np.diff(f, axis=1) * (gv - G / cell)
    terms[:, 1:] += f[:, 1:-1] * np.diff(gv, axis=1)
    C = np.concatenate(([0.0], np.cumsum(terms[0])))
    decay = np.exp(-alpha * w[0])
    K_t = decay[-1] * (gv[0, -1] + C[-1])
    mid = 0.5 * (w[0, 1:] + w[0, :-1])
    outer = np.sum(np.exp(-alpha * mid) * G[0]) + np.sum(0.5 * (decay[1:] * C[1:] + decay[:-1] * C[:-1]) * cell[0])
    return K_t, outer, gv[0, -1]


def resolvent_residual(kernel, alpha, s, t, n=None):
    """``|K(t, s) + alpha int_s^t K(u, s) du - g(t, s)|`` with ``K(u, s) = K_g(e^{-alpha (u - .)})(u, s)``.

    Inner and outer integrals share one graded mesh; one Richardson step on both.
    """
    if not (0 <= s < t and alpha > 0):
        raise DomainError("resolvent_residual needs 0 <= s < t and alpha > 0")
    n = n or kernel.stieltjes_nodes
    k1, o1, g_ts = _resolvent_parts(kernel, alpha, s, t, n)
    k2, o2, _ = _resolvent_parts(kernel, alpha, s, t, 2 * n)
    K, _ = quad.richardson(k1, k2)
    outer, _ = quad.richardson(o1, o2)
    return float(abs(K + alpha * outer - g_ts))


def proof_form(kernel, h, dh, t, s):
    """``h(t) g(t, s) - int_s^t g(v, s) h'(v) dv``, the integrated-by-parts ``K_g(h)(t, s)``."""
    if not 0 <= s < t:
        raise DomainError("proof_form needs 0 <= s < t")
    w, wt = quad.graded_rule(0.0, t - s, "left", m=16, alpha=kernel.lag_exponent)
    integral = np.sum(kernel._g(w, s) * np.asarray(dh(s + w), float) * wt)
    return float(np.asarray(h(t), float) * kernel._g(t - s, s) - integral)


def limit_condition(kernel, alpha, s=0.0, k_max=40):
    """Values of ``(1 - exp(-alpha w)) g(s + w, s)`` at ``w = 2^-k``, ``k = 1..k_max``."""
    w = 2.0 ** -np.arange(1, k_max + 1)
    return -np.expm1(-alpha * w) * kernel._g(w, s)
