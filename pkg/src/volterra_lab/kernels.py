"""Deterministic Volterra kernels ``g(t, s)``.

Every kernel is evaluated internally in lag coordinates ``w = t - s`` so that
tiny lags next to a large ``s`` do not lose precision.  Subclasses provide

* ``_g(w, s)``   -- ``g(s + w, s)`` for ``w > 0``;
* ``_dg(w, s)``  -- ``dg/dt`` at ``(s + w, s)``;
* ``cell_integral(s, w0, w1)`` -- ``int_{s+w0}^{s+w1} g(u, s) du`` (closed
  form where available, Gauss-Legendre otherwise);

and the base class builds point evaluation, Stieltjes integration against
``u -> g(u, s)``, squared norms and cell averages on top of these.
"""

import csv
import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as _spi
from scipy import special
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import expm

from . import _quadrature as quad
from .errors import DomainError, NonIntegrable, Unsupported


class DiagonalKind(enum.Enum):
    FINITE = "finite"
    ZERO = "zero"
    SINGULAR = "singular"


@dataclass(frozen=True)
class Diagonal:
    kind: DiagonalKind
    value: float | None = None

    @property
    def finite(self):
        return self.kind is not DiagonalKind.SINGULAR


def _finite(value):
    if value == 0.0:
        return Diagonal(DiagonalKind.ZERO, 0.0)
    return Diagonal(DiagonalKind.FINITE, float(value))


SINGULAR = Diagonal(DiagonalKind.SINGULAR, None)


class Kernel:
    """Base class; see the module docstring for the subclass contract."""

    family = "abstract"
    shift_invariant = True
    stieltjes_nodes = 4096

    # g(s + w, s) ~ w**lag_exponent and dg/dt ~ w**deriv_exponent as w -> 0
    lag_exponent = 0.0
    deriv_exponent = 0.0

    @property
    def singular_exponent(self):
        return min(self.lag_exponent, 0.0)

    def key(self):
        """Hashable identity used by weight caches."""
        raise NotImplementedError

    def _g(self, w, s):
        raise NotImplementedError

    def _dg(self, w, s):
        raise NotImplementedError

    def diagonal(self, s=0.0):
        raise NotImplementedError

    # -- point evaluation -------------------------------------------------

    def eval(self, t, s):
        """``g(t, s)``; returns the diagonal value when ``t == s`` and it is finite."""
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        w = t - s
        if np.any(w < 0) or np.any(s < 0):
            raise DomainError(f"{self.family}: need 0 <= s <= t")
        out = np.empty(w.shape)
        on_diag = w == 0
        if np.any(on_diag):
            d = self.diagonal(s[on_diag].ravel()[0])
            if not d.finite:
                raise DomainError(f"{self.family}: g(s, s) is singular")
            out[on_diag] = d.value
        off = ~on_diag
        out[off] = self._g(w[off], s[off])
        return out[()] if out.ndim == 0 else out

    def deriv_t(self, t, s):
        """``dg/dt(t, s)`` for ``t > s``."""
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        w = t - s
        if np.any(w <= 0):
            raise DomainError(f"{self.family}: deriv_t needs t > s")
        out = np.asarray(self._dg(w, s), dtype=float)
        return out[()] if out.ndim == 0 else out

    @property
    def diagonal_kind(self):
        return self.diagonal(0.0).kind

    @property
    def grading(self):
        return quad.grading_exponent(self.singular_exponent)

    # -- integrals in the first argument ---------------------------------

    def cell_integral(self, s, w0, w1):
        """``int_{s+w0}^{s+w1} g(u, s) du`` elementwise."""
        s, w0, w1 = np.broadcast_arrays(*(np.asarray(a, float) for a in (s, w0, w1)))
        shape = s.shape
        s, w0, w1 = s.ravel(), w0.ravel(), w1.ravel()
        x, wt = quad.gauss_legendre(w0, w1, 8)
        out = np.sum(self._g(x, s[:, None]) * wt, axis=-1)
        first = (w0 == 0) & (w1 > 0)
        if self.lag_exponent != 0.0 and np.any(first):
            xs, ws = quad.graded_rule(w0[first], w1[first], "left", alpha=self.lag_exponent)
            out[first] = np.sum(self._g(xs, s[first][:, None]) * ws, axis=-1)
        return out.reshape(shape)

    def _product_stieltjes(self, s, tau, fvals, n):
        """Product rule for ``int f(u) g(du, s)`` on the graded offset mesh.

        ``f`` is replaced by its piecewise-linear interpolant; against that,
        the Stieltjes integral over each cell is exact given the node values
        of ``g`` and its cell integral.  ``fvals`` receives the offsets
        (shape ``(m, n + 1)``) and returns ``f(s + offset)``.
        """
        s = np.asarray(s, float).reshape(-1, 1)
        tau = np.asarray(tau, float).reshape(-1, 1)
        w = quad.graded_offsets(n, self.grading)[None, :] * tau
        f = np.asarray(fvals(w), dtype=float)
        if f.shape != w.shape:
            f = np.broadcast_to(f, w.shape)
        gv = self._g(w[:, 1:], s)
        cell = np.diff(w, axis=1)
        gbar = self.cell_integral(s, w[:, :-1], w[:, 1:]) / cell
        total = np.sum((f[:, 1:] - f[:, :-1]) * (gv - gbar), axis=1)
        total += np.sum(f[:, 1:-1] * np.diff(gv, axis=1), axis=1)
        d = self.diagonal(float(s.ravel()[0]))
        if d.finite:
            g0 = np.array([self.diagonal(float(si)).value for si in s.ravel()]) if not self.shift_invariant else d.value
            total += f[:, 0] * (gv[:, 0] - g0)
        else:
            scale = np.max(np.abs(f), axis=1) + 1e-300
            if np.any(np.abs(f[:, 0]) > 1e-12 * scale):
                raise NonIntegrable(
                    f"{self.family}: singular diagonal needs an integrand vanishing at s"
                )
        return total

    def stieltjes_integrate(self, s, t, f, n=None, rtol=1e-4, return_error=False):
        """``int_s^t f(u) g(du, s)`` against the measure of ``u -> g(u, s)``.

        Graded mesh ``u_k = s + (k/N)**p (t - s)`` with one Richardson step.
        On a singular diagonal ``f`` must vanish at ``s`` (Lipschitz there).
        """
        if not t > s:
            raise DomainError("stieltjes_integrate needs t > s")
        n = n or self.stieltjes_nodes

        def fv(w):
            return f(s + w)

        coarse = self._product_stieltjes(s, t - s, fv, n)[0]
        fine = self._product_stieltjes(s, t - s, fv, 2 * n)[0]
        value, err = quad.richardson(coarse, fine)
        if not np.isfinite(value) or abs(fine - coarse) > rtol * max(abs(fine), 1.0):
            raise NonIntegrable(
                f"{self.family}: graded-mesh Stieltjes estimate did not settle "
                f"({coarse!r} vs {fine!r})"
            )
        return (value, err) if return_error else value

    def density_integrate(self, s, t, f):
        """``int_s^t f(u) dg/du(u, s) du`` by graded Gauss-Legendre panels."""
        x, wt = quad.graded_rule(0.0, t - s, "left")
        return float(np.sum(f(s + x) * self._dg(x, s) * wt))

    # -- integrals in the second argument --------------------------------

    def second_arg_average(self, t, s0, s1):
        """Average of ``s -> g(t, s)`` over ``[s0, s1]`` (elementwise, ``s1 <= t``)."""
        t, s0, s1 = np.broadcast_arrays(*(np.asarray(a, float) for a in (t, s0, s1)))
        if self.shift_invariant:
            return self.cell_integral(0.0, t - s1, t - s0) / (s1 - s0)
        return self._second_arg_quadrature(lambda w, s: self._g(w, s), t, s0, s1, self.singular_exponent)

    def deriv_second_arg_average(self, t, s0, s1):
        """Average of ``s -> dg/dt(t, s)`` over ``[s0, s1]``."""
        t, s0, s1 = np.broadcast_arrays(*(np.asarray(a, float) for a in (t, s0, s1)))
        if self.shift_invariant:
            lo = np.where(t - s1 > 0, 1.0, 0.0)
            g_hi = self._g(t - s0, 0.0)
            with np.errstate(invalid="ignore"):
                g_lo = np.where(lo > 0, self._g(np.maximum(t - s1, 1e-300), 0.0), 0.0)
            at_diag = t - s1 <= 0
            if np.any(at_diag):
                d = self.diagonal()
                if not d.finite:
                    raise DomainError(f"{self.family}: derivative average touches a singular diagonal")
                g_lo = np.where(at_diag, d.value, g_lo)
            return (g_hi - g_lo) / (s1 - s0)
        return self._second_arg_quadrature(lambda w, s: self._dg(w, s), t, s0, s1, self.deriv_exponent)

    def _second_arg_quadrature(self, fn, t, s0, s1, exponent):
        # fn(w, s) is integrated over s in [s0, s1] at fixed t; cells touching
        # the diagonal are integrated in the lag w = t - s, cells touching
        # s = 0 with a rule adapted to origin_exponent
        shape = t.shape
        t, s0, s1 = t.ravel(), s0.ravel(), s1.ravel()
        total = np.zeros(t.shape)
        at_diag = s1 >= t
        at_zero = (s0 <= 0.0) & (self.origin_exponent != 0.0)
        mid = np.where(at_diag & at_zero, 0.5 * (s0 + s1), np.where(at_diag, s0, s1))
        # piece next to the diagonal: s in [mid, s1]
        m = at_diag
        if np.any(m):
            w, wt = quad.graded_rule(0.0, t[m] - mid[m], "left", alpha=exponent)
            total[m] += np.sum(fn(w, t[m][:, None] - w) * wt, axis=-1)
        # piece next to the origin: s in [s0, mid]
        m = at_zero
        if np.any(m):
            x, wt = quad.graded_rule(s0[m], mid[m], "left", alpha=self.origin_exponent)
            total[m] += np.sum(fn(t[m][:, None] - x, x) * wt, axis=-1)
        m = ~at_diag & ~at_zero
        if np.any(m):
            x, wt = quad.gauss_legendre(s0[m], s1[m], 10)
            total[m] += np.sum(fn(t[m][:, None] - x, x) * wt, axis=-1)
        return (total / (s1 - s0)).reshape(shape)

    # -- norms --------------------------------------------------------------

    # g(t, s) ~ s**origin_exponent as s -> 0 with t fixed
    origin_exponent = 0.0

    def l2_norm_sq(self, t):
        """``int_0^t g(t, s)**2 ds`` by quadrature graded at the singular ends.

        The half next to the diagonal is integrated in the lag ``w = t - s`` so
        that small lags keep full relative precision.
        """
        if not t > 0:
            raise DomainError("l2_norm_sq needs t > 0")
        w, ww = quad.graded_rule(0.0, 0.5 * t, "left", m=16, alpha=2.0 * self.lag_exponent)
        side = "left" if self.origin_exponent else "none"
        s, ws = quad.graded_rule(0.0, 0.5 * t, side, m=16, alpha=2.0 * self.origin_exponent)
        with np.errstate(over="ignore"):
            val = float(np.sum(self._g(w, t - w) ** 2 * ww) + np.sum(self._g(t - s, s) ** 2 * ws))
        if not np.isfinite(val):
            raise NonIntegrable(f"{self.family}: squared kernel not integrable")
        return val

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(f'{k}={v!r}' for k, v in self._params().items())})"

    def _params(self):
        return {}


@dataclass(frozen=True, repr=False)
class ConstantOne(Kernel):
    """``g == 1``: ``X`` is the driver itself."""

    family = "ConstantOne"

    def key(self):
        return (self.family,)

    def _g(self, w, s):
        return np.ones(np.broadcast(w, s).shape)

    def _dg(self, w, s):
        return np.zeros(np.broadcast(w, s).shape)

    def diagonal(self, s=0.0):
        return Diagonal(DiagonalKind.FINITE, 1.0)

    def cell_integral(self, s, w0, w1):
        s, w0, w1 = np.broadcast_arrays(*(np.asarray(a, float) for a in (s, w0, w1)))
        return w1 - w0

    def l2_norm_sq(self, t):
        if not t > 0:
            raise DomainError("l2_norm_sq needs t > 0")
        return float(t)


@dataclass(frozen=True, repr=False)
class ExpShift(Kernel):
    """``g(t, s) = exp(-alpha (t - s))`` (Ornstein-Uhlenbeck kernel)."""

    alpha: float
    family = "ExpShift"

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"ExpShift needs alpha > 0, got {self.alpha}")

    def key(self):
        return (self.family, float(self.alpha))

    def _params(self):
        return {"alpha": self.alpha}

    def _g(self, w, s):
        return np.exp(-self.alpha * np.asarray(w, float)) + 0.0 * np.asarray(s, float)

    def _dg(self, w, s):
        return -self.alpha * self._g(w, s)

    def diagonal(self, s=0.0):
        return Diagonal(DiagonalKind.FINITE, 1.0)

    def cell_integral(self, s, w0, w1):
        s, w0, w1 = np.broadcast_arrays(*(np.asarray(a, float) for a in (s, w0, w1)))
        a = self.alpha
        return -np.exp(-a * w0) * np.expm1(-a * (w1 - w0)) / a

    def l2_norm_sq(self, t):
        if not t > 0:
            raise DomainError("l2_norm_sq needs t > 0")
        return float(-np.expm1(-2 * self.alpha * t) / (2 * self.alpha))


@dataclass(frozen=True, repr=False)
class GammaShift(Kernel):
    """Turbulence kernel ``g(w) = w**(nu - 1) exp(-lam w)`` with ``nu > 1/2``."""

    nu: float
    lam: float
    family = "GammaShift"

    def __post_init__(self):
        if not (self.nu > 0.5 and self.lam > 0):
            raise DomainError(f"GammaShift needs nu > 1/2 and lam > 0, got {self.nu}, {self.lam}")

    def key(self):
        return (self.family, float(self.nu), float(self.lam))

    def _params(self):
        return {"nu": self.nu, "lam": self.lam}

    @property
    def lag_exponent(self):
        return self.nu - 1.0

    @property
    def deriv_exponent(self):
        return 0.0 if self.nu == 1.0 else min(self.nu - 2.0, 0.0)

    def _g(self, w, s):
        w = np.asarray(w, float) + 0.0 * np.asarray(s, float)
        with np.errstate(divide="ignore"):
            return w ** (self.nu - 1.0) * np.exp(-self.lam * w)

    def _dg(self, w, s):
        w = np.asarray(w, float) + 0.0 * np.asarray(s, float)
        nu, lam = self.nu, self.lam
        with np.errstate(divide="ignore", invalid="ignore"):
            return ((nu - 1.0) * w ** (nu - 2.0) - lam * w ** (nu - 1.0)) * np.exp(-lam * w)

    def diagonal(self, s=0.0):
        if self.nu < 1.0:
            return SINGULAR
        if self.nu == 1.0:
            return Diagonal(DiagonalKind.FINITE, 1.0)
        return Diagonal(DiagonalKind.ZERO, 0.0)

    def cell_integral(self, s, w0, w1):
        s, w0, w1 = np.broadcast_arrays(*(np.asarray(a, float) for a in (s, w0, w1)))
        nu, lam = self.nu, self.lam
        scale = special.gamma(nu) * lam ** (-nu)
        x0, x1 = lam * w0, lam * w1
        upper = special.gammaincc(nu, x0) - special.gammaincc(nu, x1)
        lower = special.gammainc(nu, x1) - special.gammainc(nu, x0)
        return scale * np.where(x0 > nu, upper, lower)

    def l2_norm_sq(self, t):
        if not t > 0:
            raise DomainError("l2_norm_sq needs t > 0")
        a = 2.0 * self.nu - 1.0
        return float(special.gamma(a) * (2.0 * self.lam) ** (-a) * special.gammainc(a, 2.0 * self.lam * t))


@dataclass(frozen=True, repr=False, eq=False)
class CarmaShift(Kernel):
    """CARMA kernel ``g(w) = b' exp(A w) e_p``; ``A`` must be stable."""

    A: np.ndarray
    b: np.ndarray
    family = "CarmaShift"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, float))
        b = np.atleast_1d(np.asarray(self.b, float))
        p = A.shape[0]
        if A.shape != (p, p) or b.shape != (p,):
            raise DomainError("CarmaShift needs a p x p matrix A and a length-p vector b")
        if np.max(np.linalg.eigvals(A).real) >= 0:
            raise DomainError("CarmaShift needs all eigenvalues of A to have negative real part")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_coefficients(cls, ar, b):
        """Companion-form ``A`` from autoregressive coefficients ``alpha_1..alpha_p``."""
        ar = np.asarray(ar, float)
        p = ar.size
        A = np.zeros((p, p))
        A[:-1, 1:] = np.eye(p - 1)
        A[-1, :] = -ar[::-1]
        b = np.asarray(b, float)
        if b.size < p:
            b = np.concatenate((b, np.zeros(p - b.size)))
        return cls(A, b)

    def key(self):
        return (self.family, self.A.tobytes(), self.b.tobytes())

    def _params(self):
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    @property
    def p(self):
        return self.A.shape[0]

    def _expm(self, w):
        w = np.asarray(w, float)
        return expm(w[..., None, None] * self.A)

    def _g(self, w, s):
        w = np.asarray(w, float) + 0.0 * np.asarray(s, float)
        return self._expm(w)[..., :, -1] @ self.b

    def _dg(self, w, s):
        w = np.asarray(w, float) + 0.0 * np.asarray(s, float)
        return self._expm(w)[..., :, -1] @ (self.b @ self.A)

    def diagonal(self, s=0.0):
        return _finite(self.b[-1])

    def cell_integral(self, s, w0, w1):
        s, w0, w1 = np.broadcast_arrays(*(np.asarray(a, float) for a in (s, w0, w1)))
        p = self.p
        aug = np.zeros((2 * p, 2 * p))
        aug[:p, :p] = self.A
        aug[:p, p:] = np.eye(p)
        h = (w1 - w0)[..., None, None]
        block = expm(h * aug)[..., :p, p:]          # int_0^h exp(A u) du
        start = self._expm(w0)
        ep = np.zeros(p)
        ep[-1] = 1.0
        return (start @ block @ ep) @ self.b


def fbm_constant(H):
    """``c(H)`` normalising the fBm Volterra kernel to unit variance at t = 1."""
    return float(np.sqrt(2 * H * special.gamma(1.5 - H) / (special.gamma(H + 0.5) * special.gamma(2 - 2 * H))))


@lru_cache(maxsize=65536)
def _fbm_bracket_integral(H, lag, ratio):
    # int_s^t (u - s)**(H - 3/2) (1 - (s/u)**(1/2 - H)) du, keyed by (t - s, s/t)
    s = ratio * lag / (1.0 - ratio)

    def bracket(w):
        return -np.expm1((0.5 - H) * np.log(s / (s + w))) / w if w > 0 else (0.5 - H) / s

    val, _ = _spi.quad(bracket, 0.0, lag, weight="alg", wvar=(H - 0.5, 0.0), limit=200)
    return val


@dataclass(frozen=True, repr=False)
class FbmBracket(Kernel):
    """Molchan-Golosov kernel giving fractional Brownian motion with Hurst ``H``.

    Point values use the Gauss hypergeometric closed form of the bracketed
    integral; :meth:`eval_quadrature` keeps the direct adaptive-quadrature
    route as an independent cross-check.
    """

    H: float
    family = "FbmBracket"
    shift_invariant = False

    def __post_init__(self):
        if not 0.0 < self.H < 1.0:
            raise DomainError(f"FbmBracket needs H in (0, 1), got {self.H}")

    def key(self):
        return (self.family, float(self.H))

    def _params(self):
        return {"H": self.H}

    @property
    def c(self):
        return fbm_constant(self.H)

    @property
    def origin_exponent(self):
        return -abs(self.H - 0.5)

    @property
    def lag_exponent(self):
        return self.H - 0.5

    @property
    def deriv_exponent(self):
        return 0.0 if self.H == 0.5 else self.H - 1.5

    def _g(self, w, s):
        w, s = np.broadcast_arrays(np.asarray(w, float), np.asarray(s, float))
        H = self.H
        if H == 0.5:
            return np.ones(w.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.c * w ** (H - 0.5) * special.hyp2f1(H - 0.5, 0.5 - H, H + 0.5, -w / s)
        return np.where(s > 0, out, np.inf)

    def _dg(self, w, s):
        w, s = np.broadcast_arrays(np.asarray(w, float), np.asarray(s, float))
        H = self.H
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.c * (H - 0.5) * (s / (s + w)) ** (0.5 - H) * w ** (H - 1.5)

    def eval_quadrature(self, t, s):
        """``g(t, s)`` straight from the bracketed-integral form (adaptive QUADPACK)."""
        if not t > s > 0:
            raise DomainError("FbmBracket.eval_quadrature needs t > s > 0")
        H, lag = self.H, t - s
        inner = _fbm_bracket_integral(H, lag, s / t)
        return self.c * lag ** (H - 0.5) + self.c * (0.5 - H) * inner

    def diagonal(self, s=0.0):
        if self.H < 0.5:
            return SINGULAR
        if self.H == 0.5:
            return Diagonal(DiagonalKind.FINITE, 1.0)
        return Diagonal(DiagonalKind.ZERO, 0.0)


@dataclass(frozen=True, repr=False, eq=False)
class Tabulated(Kernel):
    """Kernel given on a rectangular ``(t, s)`` table, bilinear in between."""

    t_grid: np.ndarray
    s_grid: np.ndarray
    values: np.ndarray
    fd_fallback: bool = False
    family = "Tabulated"
    shift_invariant = False
    _interp: object = field(init=False, repr=False)

    def __post_init__(self):
        tg = np.asarray(self.t_grid, float)
        sg = np.asarray(self.s_grid, float)
        vals = np.array(self.values, float)
        if vals.shape != (tg.size, sg.size):
            raise DomainError("Tabulated values must have shape (len(t_grid), len(s_grid))")
        if np.any(np.diff(tg) <= 0) or np.any(np.diff(sg) <= 0):
            raise DomainError("Tabulated grids must be strictly increasing")
        # entries above the diagonal are never used; back-fill them column-wise
        for j in range(sg.size):
            col = vals[:, j]
            ok = np.flatnonzero(np.isfinite(col))
            if ok.size == 0:
                raise DomainError(f"Tabulated column s={sg[j]} has no values")
            col[: ok[0]] = col[ok[0]]
        if not np.all(np.isfinite(vals)):
            raise DomainError("Tabulated table has interior gaps")
        for name, arr in (("t_grid", tg), ("s_grid", sg), ("values", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(
            self, "_interp", RegularGridInterpolator((tg, sg), vals, method="linear")
        )

    @classmethod
    def from_csv(cls, path, fd_fallback=False):
        """Load a table with columns ``t, s, g`` (header required)."""
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"t", "s", "g"} - set(reader.fieldnames or ())
            if missing:
                raise DomainError(f"{path}: missing columns {sorted(missing)}")
            for row in reader:
                rows.append((float(row["t"]), float(row["s"]), float(row["g"])))
        if not rows:
            raise DomainError(f"{path}: empty table")
        arr = np.array(rows)
        tg = np.unique(arr[:, 0])
        sg = np.unique(arr[:, 1])
        vals = np.full((tg.size, sg.size), np.nan)
        vals[np.searchsorted(tg, arr[:, 0]), np.searchsorted(sg, arr[:, 1])] = arr[:, 2]
        return cls(tg, sg, vals, fd_fallback=fd_fallback)

    def key(self):
        return (self.family, self.t_grid.tobytes(), self.s_grid.tobytes(), self.values.tobytes())

    def _params(self):
        return {"shape": self.values.shape}

    def _g(self, w, s):
        w, s = np.broadcast_arrays(np.asarray(w, float), np.asarray(s, float))
        pts = np.stack((s + w, s), axis=-1)
        return self._interp(pts.reshape(-1, 2)).reshape(w.shape)

    def _dg(self, w, s):
        if not self.fd_fallback:
            raise Unsupported("Tabulated kernels have no t-derivative unless fd_fallback=True")
        h = 0.5 * float(np.min(np.diff(self.t_grid)))
        w, s = np.broadcast_arrays(np.asarray(w, float), np.asarray(s, float))
        lo = np.maximum(w - h, 0.0)
        hi = np.minimum(w + h, self.t_grid[-1] - s)
        return (self._g(hi, s) - self._g(lo, s)) / (hi - lo)

    def diagonal(self, s=0.0):
        return _finite(float(self._interp([[s, s]])[0]))


_FAMILIES = {
    "ConstantOne": lambda p: ConstantOne(),
    "ExpShift": lambda p: ExpShift(p["alpha"]),
    "GammaShift": lambda p: GammaShift(p["nu"], p["lam"]),
    "FbmBracket": lambda p: FbmBracket(p["H"]),
    "CarmaShift": lambda p: (
        CarmaShift(np.array(p["A"]), np.array(p["b"]))
        if "A" in p
        else CarmaShift.from_coefficients(p["ar"], p["b"])
    ),
    "Tabulated": lambda p: Tabulated.from_csv(p["csv"], fd_fallback=p.get("fd_fallback", False)),
}


def kernel_from_config(block):
    """Build a kernel from ``{"family": name, **params}``."""
    block = dict(block)
    family = block.pop("family", None)
    if family not in _FAMILIES:
        raise DomainError(f"unknown kernel family {family!r}; expected one of {sorted(_FAMILIES)}")
    try:
        return _FAMILIES[family](block)
    except KeyError as exc:
        raise DomainError(f"kernel {family}: missing parameter {exc.args[0]!r}") from None
