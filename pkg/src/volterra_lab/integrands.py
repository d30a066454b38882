"""Deterministic integrands ``h`` with structure the operator can exploit.

Plain vectorised callables are accepted everywhere as well; the classes here
add closed forms (step functions, exponentials) and a Lipschitz certificate.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


class Integrand:
    # Lipschitz constant on [0, inf) if known; None means "probe numerically"
    lipschitz = None

    def __call__(self, u):
        raise NotImplementedError

    def at(self, t):
        """The integrand used for an integral up to horizon ``t``."""
        return self


@dataclass(frozen=True)
class Constant(Integrand):
    c: float = 1.0

    @property
    def lipschitz(self):
        return 0.0

    def __call__(self, u):
        return np.full(np.shape(u), float(self.c))


@dataclass(frozen=True, eq=False)
class StepFunction(Integrand):
    """``h = sum_i values[i] 1_[breaks[i], breaks[i+1])``."""

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breaks, float)
        v = np.asarray(self.values, float)
        if b.ndim != 1 or v.shape != (b.size - 1,):
            raise DomainError("StepFunction needs len(values) == len(breaks) - 1")
        if np.any(np.diff(b) <= 0):
            raise DomainError("StepFunction breaks must be strictly increasing")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    def __call__(self, u):
        u = np.asarray(u, float)
        idx = np.searchsorted(self.breaks, u, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size)
        return np.where(inside, self.values[np.clip(idx, 0, self.values.size - 1)], 0.0)

    def pieces(self):
        return zip(self.breaks[:-1], self.breaks[1:], self.values)


def indicator(a, b):
    """``1_[a, b)`` as a step function."""
    return StepFunction(np.array([a, b], float), np.array([1.0]))


@dataclass(frozen=True)
class ExpDecay(Integrand):
    """``h(u) = exp(-alpha (horizon - u))``; ``horizon=None`` binds at use."""

    alpha: float
    horizon: float | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("ExpDecay needs alpha > 0")

    def at(self, t):
        return self if self.horizon is not None else ExpDecay(self.alpha, float(t))

    @property
    def lipschitz(self):
        return self.alpha

    def __call__(self, u):
        if self.horizon is None:
            raise DomainError("ExpDecay without horizon; call .at(t) first")
        return np.exp(-self.alpha * (self.horizon - np.asarray(u, float)))


@dataclass(frozen=True)
class Combination(Integrand):
    """``sum_i coef_i h_i``; the operator is applied termwise."""

    terms: tuple

    def at(self, t):
        return Combination(tuple((c, h.at(t) if isinstance(h, Integrand) else h) for c, h in self.terms))

    @property
    def lipschitz(self):
        lips = [getattr(h, "lipschitz", None) for _, h in self.terms]
        if any(x is None for x in lips):
            return None
        return float(sum(abs(c) * x for (c, _), x in zip(self.terms, lips)))

    def __call__(self, u):
        return sum(c * np.asarray(h(u), float) for c, h in self.terms)


def resolve(h, t):
    """Bind a horizon-dependent integrand to ``t``; wrap scalars as constants."""
    if np.isscalar(h):
        return Constant(float(h))
    if isinstance(h, Integrand):
        return h.at(t)
    return h
