"""Levy drivers: triplets, exact increment sampling and integrability checks.

The truncation function is fixed to ``tau(z) = z 1{|z| <= 1}``.  Every Levy
measure exposes three truncated moments,

    tail(a) = l(|z| > a),   m1(a) = int_{|z|<=a} z l(dz),   m2(a) = int_{|z|<=a} z^2 l(dz),

which is all the integrability conditions and the triplet drift need.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special, stats

from .errors import DomainError, Unsupported
from .grid import SimulationGrid


def as_seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def child_seed(seed, index):
    """Deterministic child of ``seed`` keyed by ``index`` (no spawn counter)."""
    ss = as_seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(index),))


def as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(as_seed_sequence(seed))


def upper_gamma(s, x):
    """Upper incomplete gamma ``Gamma(s, x)`` for any real ``s`` and ``x > 0``."""
    x = np.asarray(x, float)
    if s > 0:
        return special.gamma(s) * special.gammaincc(s, x)
    if s == 0:
        return special.exp1(x)
    with np.errstate(divide="ignore", over="ignore"):
        return (upper_gamma(s + 1.0, x) - x**s * np.exp(-x)) / s


# --------------------------------------------------------------------------
# jump laws


class JumpLaw:
    """Distribution of a single compound-Poisson jump."""

    name = "abstract"

    def sample(self, rng, size):
        raise NotImplementedError

    @property
    def m1(self):
        raise NotImplementedError

    @property
    def m2(self):
        raise NotImplementedError

    def truncated(self, a):
        """``(P(|Z| > a), E[Z; |Z| <= a], E[Z^2; |Z| <= a])`` elementwise in ``a``."""
        raise NotImplementedError

    @property
    def nonnegative(self):
        return False


@dataclass(frozen=True)
class Normal(JumpLaw):
    mean: float = 0.0
    sd: float = 1.0
    name = "Normal"

    def __post_init__(self):
        if not self.sd > 0:
            raise DomainError("Normal jump law needs sd > 0")

    def sample(self, rng, size):
        return rng.normal(self.mean, self.sd, size)

    @property
    def m1(self):
        return self.mean

    @property
    def m2(self):
        return self.mean**2 + self.sd**2

    def truncated(self, a):
        a = np.asarray(a, float)
        mu, sd = self.mean, self.sd
        lo, hi = (-a - mu) / sd, (a - mu) / sd
        mass = special.ndtr(hi) - special.ndtr(lo)
        plo, phi = stats.norm.pdf(lo), stats.norm.pdf(hi)
        with np.errstate(invalid="ignore"):
            edge = np.where(np.isfinite(lo), lo * plo, 0.0) - np.where(np.isfinite(hi), hi * phi, 0.0)
        e1 = mu * mass + sd * (plo - phi)
        e2 = (mu**2 + sd**2) * mass + 2 * mu * sd * (plo - phi) + sd**2 * edge
        return 1.0 - mass, e1, e2


@dataclass(frozen=True)
class Exponential(JumpLaw):
    rate: float = 1.0
    name = "Exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError("Exponential jump law needs rate > 0")

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    @property
    def m1(self):
        return 1.0 / self.rate

    @property
    def m2(self):
        return 2.0 / self.rate**2

    @property
    def nonnegative(self):
        return True

    def truncated(self, a):
        x = self.rate * np.asarray(a, float)
        r = self.rate
        return np.exp(-x), special.gammainc(2, x) / r, 2.0 * special.gammainc(3, x) / r**2


@dataclass(frozen=True)
class TwoPoint(JumpLaw):
    """``Z = z1`` with probability ``p1``, else ``z2``."""

    z1: float
    p1: float
    z2: float = 0.0
    name = "TwoPoint"

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise DomainError("TwoPoint needs p1 in [0, 1]")

    def sample(self, rng, size):
        return np.where(rng.random(size) < self.p1, self.z1, self.z2)

    @property
    def m1(self):
        return self.p1 * self.z1 + (1 - self.p1) * self.z2

    @property
    def m2(self):
        return self.p1 * self.z1**2 + (1 - self.p1) * self.z2**2

    @property
    def nonnegative(self):
        return self.z1 >= 0 and self.z2 >= 0

    def truncated(self, a):
        a = np.asarray(a, float)
        tail = np.zeros(a.shape)
        e1 = np.zeros(a.shape)
        e2 = np.zeros(a.shape)
        for z, p in ((self.z1, self.p1), (self.z2, 1 - self.p1)):
            inside = abs(z) <= a
            tail = tail + np.where(inside, 0.0, p)
            e1 = e1 + np.where(inside, p * z, 0.0)
            e2 = e2 + np.where(inside, p * z * z, 0.0)
        return tail, e1, e2


@dataclass(frozen=True, eq=False)
class TabulatedLaw(JumpLaw):
    """Symmetric law tabulated by the inverse CDF of ``|Z|`` (sign fair coin)."""

    quantiles: np.ndarray
    levels: np.ndarray
    moments: tuple
    name = "Tabulated"

    def sample(self, rng, size):
        u = rng.random(size)
        mag = np.interp(rng.random(size), self.levels, self.quantiles)
        return np.where(u < 0.5, -mag, mag)

    @property
    def m1(self):
        return 0.0

    @property
    def m2(self):
        return self.moments[1]

    def truncated(self, a):
        raise Unsupported("TabulatedLaw truncated moments come from the parent measure")


JUMP_LAWS = {"Normal": Normal, "Exponential": Exponential, "TwoPoint": TwoPoint}


def jump_law_from_config(block):
    block = dict(block)
    name = block.pop("law", None)
    if name not in JUMP_LAWS:
        raise DomainError(f"unknown jump law {name!r}; expected one of {sorted(JUMP_LAWS)}")
    return JUMP_LAWS[name](**block)


# --------------------------------------------------------------------------
# Levy measures


class LevyMeasure:
    finite_activity = False

    def tail(self, a):
        raise NotImplementedError

    def m1(self, a):
        raise NotImplementedError

    def m2(self, a):
        raise NotImplementedError

    def second_moment(self):
        return float(self.m2(np.inf))


@dataclass(frozen=True)
class CompoundPoissonMeasure(LevyMeasure):
    rate: float
    law: JumpLaw
    finite_activity = True

    def _t(self, a):
        tail, e1, e2 = self.law.truncated(a)
        return self.rate * tail, self.rate * e1, self.rate * e2

    def tail(self, a):
        return self._t(a)[0]

    def m1(self, a):
        return self._t(a)[1]

    def m2(self, a):
        return self._t(a)[2]

    def second_moment(self):
        return self.rate * self.law.m2


@dataclass(frozen=True)
class GammaMeasure(LevyMeasure):
    """``l(dz) = a z^{-1} exp(-z/b) dz`` on ``z > 0``."""

    shape_rate: float
    scale: float

    def tail(self, a):
        return self.shape_rate * special.exp1(np.asarray(a, float) / self.scale)

    def m1(self, a):
        return self.shape_rate * self.scale * special.gammainc(1, np.asarray(a, float) / self.scale)

    def m2(self, a):
        return self.shape_rate * self.scale**2 * special.gammainc(2, np.asarray(a, float) / self.scale)


@dataclass(frozen=True)
class InverseGaussianMeasure(LevyMeasure):
    """``l(dz) = delta / sqrt(2 pi) z^{-3/2} exp(-gamma^2 z / 2) dz``."""

    delta: float
    gamma: float

    @property
    def _c(self):
        return 0.5 * self.gamma**2

    def _moment(self, k, a):
        s = k - 0.5
        x = self._c * np.asarray(a, float)
        return self.delta / np.sqrt(2 * np.pi) * special.gamma(s) * self._c ** (-s) * special.gammainc(s, x)

    def tail(self, a):
        x = self._c * np.asarray(a, float)
        return self.delta / np.sqrt(2 * np.pi) * np.sqrt(self._c) * upper_gamma(-0.5, x)

    def m1(self, a):
        return self._moment(1, a)

    def m2(self, a):
        return self._moment(2, a)


@dataclass(frozen=True)
class TemperedStableMeasure(LevyMeasure):
    """Symmetric ``l(dz) = C exp(-lam |z|) |z|^{-1-Y} dz`` with ``0 < Y < 2``."""

    C: float
    lam: float
    Y: float

    def __post_init__(self):
        if not (self.C > 0 and self.lam > 0 and 0 < self.Y < 2):
            raise DomainError("TemperedStable needs C > 0, lam > 0, 0 < Y < 2")

    def tail(self, a):
        x = self.lam * np.asarray(a, float)
        return 2 * self.C * self.lam**self.Y * upper_gamma(-self.Y, x)

    def m1(self, a):
        return np.zeros(np.shape(a))

    def m2(self, a):
        s = 2.0 - self.Y
        x = self.lam * np.asarray(a, float)
        return 2 * self.C * special.gamma(s) * self.lam ** (-s) * special.gammainc(s, x)


# --------------------------------------------------------------------------
# triplets, paths, drivers


def truncation_fn(z):
    z = np.asarray(z, float)
    return np.where(np.abs(z) <= 1.0, z, 0.0)


@dataclass(frozen=True)
class LevyTriplet:
    """``(gamma, c2, l)`` with truncation ``tau(z) = z 1{|z| <= 1}``."""

    gamma: float
    c2: float
    levy_measure: LevyMeasure | None = None

    def __post_init__(self):
        if self.c2 < 0:
            raise DomainError("triplet needs c2 >= 0")

    truncation_fn = staticmethod(truncation_fn)

    def exponent(self, u):
        """Characteristic exponent ``psi(u)`` (finite-activity measures only)."""
        u = np.asarray(u, float)
        psi = 1j * u * self.gamma - 0.5 * self.c2 * u**2
        lm = self.levy_measure
        if lm is None:
            return psi
        if not isinstance(lm, CompoundPoissonMeasure):
            raise Unsupported("characteristic exponent implemented for compound-Poisson measures only")
        law = lm.law
        if isinstance(law, Normal):
            cf = np.exp(1j * u * law.mean - 0.5 * (law.sd * u) ** 2)
        elif isinstance(law, Exponential):
            cf = law.rate / (law.rate - 1j * u)
        elif isinstance(law, TwoPoint):
            cf = law.p1 * np.exp(1j * u * law.z1) + (1 - law.p1) * np.exp(1j * u * law.z2)
        else:
            raise Unsupported(f"no characteristic function for {law.name}")
        _, e1, _ = law.truncated(1.0)
        return psi + lm.rate * (cf - 1.0 - 1j * u * e1)


@dataclass(frozen=True)
class DriverPath:
    """Per-cell driver increments on a grid.

    ``dB`` holds standard Brownian increments; the Gaussian part of the
    driver is ``sqrt(c2) * dB``.  Jumps are kept individually; the
    compensator enters only through ``compensator_rate`` and ``increments``.
    ``extra`` carries increments not resolved into jumps (gamma/IG
    subordinators, Gaussian small-jump substitution).
    """

    grid: SimulationGrid
    c2: float
    dB: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    compensator_rate: float = 0.0
    drift: float = 0.0
    extra: np.ndarray | None = None

    @cached_property
    def jump_cells(self):
        return self.grid.cell_of(self.jump_times)

    @property
    def gaussian_increments(self):
        return np.sqrt(self.c2) * self.dB

    def increments(self):
        g = self.grid
        out = self.drift * g.dt + np.sqrt(self.c2) * self.dB - self.compensator_rate * g.dt
        out = out + np.bincount(self.jump_cells, weights=self.jump_sizes, minlength=g.n)
        if self.extra is not None:
            out = out + self.extra
        return out

    def values(self):
        """``L`` at the grid nodes, ``L(0) = 0``."""
        return np.concatenate(([0.0], np.cumsum(self.increments())))

    @property
    def is_pure_brownian(self):
        return self.jump_sizes.size == 0 and self.extra is None and self.compensator_rate == 0.0

    def coarsen(self, factor):
        g = self.grid.coarsen(factor)

        def fold(a):
            return None if a is None else a.reshape(g.n, factor).sum(axis=1)

        return DriverPath(
            g, self.c2, fold(self.dB), self.jump_times, self.jump_sizes,
            self.compensator_rate, self.drift, fold(self.extra),
        )


class LevyDriver:
    kind = "abstract"

    @property
    def triplet(self) -> LevyTriplet:
        raise NotImplementedError

    def sample(self, grid, rng) -> DriverPath:
        raise NotImplementedError

    def moments(self):
        raise NotImplementedError

    @property
    def is_brownian(self):
        return False

    @property
    def is_compound_poisson(self):
        return False

    @property
    def zero_mean(self):
        return self.moments()[0] == 0.0


def _cp_jumps(rng, rate, law, T):
    n = rng.poisson(rate * T)
    times = np.sort(rng.uniform(0.0, T, n))
    return times, np.asarray(law.sample(rng, n), float)


@dataclass(frozen=True)
class Brownian(LevyDriver):
    c2: float = 1.0
    drift: float = 0.0
    kind = "Brownian"

    def __post_init__(self):
        if self.c2 < 0:
            raise DomainError("Brownian needs c2 >= 0")

    @property
    def triplet(self):
        return LevyTriplet(self.drift, self.c2, None)

    @property
    def is_brownian(self):
        return True

    def sample(self, grid, rng):
        dB = rng.normal(0.0, np.sqrt(grid.dt), grid.n)
        return DriverPath(grid, self.c2, dB, np.empty(0), np.empty(0), 0.0, self.drift)

    def moments(self):
        return float(self.drift), float(self.c2)


@dataclass(frozen=True)
class CompensatedCompoundPoisson(LevyDriver):
    """``sum z_i - rate m1 t`` (zero mean), optionally plus ``sqrt(c2) B``."""

    rate: float
    jump_law: JumpLaw
    c2: float = 0.0
    kind = "CompensatedCompoundPoisson"

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError("compound Poisson needs rate > 0")

    @property
    def measure(self):
        return CompoundPoissonMeasure(self.rate, self.jump_law)

    @property
    def triplet(self):
        # zero mean: gamma + int (z - tau(z)) l(dz) = 0
        big = self.rate * (self.jump_law.m1 - float(self.jump_law.truncated(1.0)[1]))
        return LevyTriplet(-big, self.c2, self.measure)

    @property
    def is_compound_poisson(self):
        return True

    @property
    def compensator_rate(self):
        return self.rate * self.jump_law.m1

    def sample(self, grid, rng):
        dB = rng.normal(0.0, np.sqrt(grid.dt), grid.n) if self.c2 > 0 else np.zeros(grid.n)
        times, sizes = _cp_jumps(rng, self.rate, self.jump_law, grid.T)
        return DriverPath(grid, self.c2, dB, times, sizes, self.compensator_rate)

    def moments(self):
        return 0.0, float(self.c2 + self.rate * self.jump_law.m2)


class Subordinator(LevyDriver):
    """Nondecreasing driver used for ``L_sigma``."""

    kind = "Subordinator"
    family = "abstract"

    @property
    def triplet(self):
        lm = self.measure
        return LevyTriplet(float(lm.m1(1.0)), 0.0, lm)

    def moments(self):
        lm = self.measure
        return float(lm.m1(np.inf)), float(lm.second_moment())


@dataclass(frozen=True)
class GammaSubordinator(Subordinator):
    """Gamma process: ``L(t) ~ Gamma(shape = shape_rate t, scale)``."""

    shape_rate: float
    scale: float
    family = "Gamma"

    def __post_init__(self):
        if not (self.shape_rate > 0 and self.scale > 0):
            raise DomainError("Gamma subordinator needs positive shape rate and scale")

    @property
    def measure(self):
        return GammaMeasure(self.shape_rate, self.scale)

    def sample(self, grid, rng):
        inc = rng.gamma(self.shape_rate * grid.dt, self.scale, grid.n)
        return DriverPath(grid, 0.0, np.zeros(grid.n), np.empty(0), np.empty(0), extra=inc)


@dataclass(frozen=True)
class InverseGaussianSubordinator(Subordinator):
    """IG(delta, gamma) process: ``L(t) ~ IG(mean = delta t / gamma, shape = (delta t)^2)``."""

    delta: float
    gamma: float
    family = "InverseGaussian"

    def __post_init__(self):
        if not (self.delta > 0 and self.gamma > 0):
            raise DomainError("IG subordinator needs delta > 0 and gamma > 0")

    @property
    def measure(self):
        return InverseGaussianMeasure(self.delta, self.gamma)

    def sample(self, grid, rng):
        d = self.delta * grid.dt
        inc = rng.wald(d / self.gamma, d * d, grid.n)
        return DriverPath(grid, 0.0, np.zeros(grid.n), np.empty(0), np.empty(0), extra=inc)


@dataclass(frozen=True)
class CompoundPoissonPositive(Subordinator):
    rate: float
    jump_law: JumpLaw
    family = "CompoundPoissonPositive"

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError("compound Poisson needs rate > 0")
        if not self.jump_law.nonnegative:
            raise DomainError("CompoundPoissonPositive needs a nonnegative jump law")

    @property
    def measure(self):
        return CompoundPoissonMeasure(self.rate, self.jump_law)

    @property
    def is_compound_poisson(self):
        return True

    def sample(self, grid, rng):
        times, sizes = _cp_jumps(rng, self.rate, self.jump_law, grid.T)
        return DriverPath(grid, 0.0, np.zeros(grid.n), times, sizes)

    def moments(self):
        return self.rate * self.jump_law.m1, self.rate * self.jump_law.m2


@dataclass(frozen=True)
class TruncatedSeries(LevyDriver):
    """Symmetric tempered-stable driver with jumps below ``eps`` truncated.

    Jumps with ``|z| > eps`` are simulated exactly as compound Poisson; the
    small jumps are either dropped or replaced by a Gaussian with matching
    variance.
    """

    C: float
    lam: float
    Y: float
    eps: float = 1e-3
    gaussian_small_jumps: bool = True
    kind = "TruncatedSeries"
    _table: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError("TruncatedSeries needs eps > 0")
        lm = self.measure
        # inverse CDF of |Z| given |Z| > eps on a log grid
        z = np.geomspace(self.eps, self.eps + 60.0 / self.lam, 4000)
        tail = np.asarray(lm.tail(z), float)
        levels = 1.0 - tail / tail[0]
        object.__setattr__(self, "_table", (float(tail[0]), levels, z))

    @property
    def measure(self):
        return TemperedStableMeasure(self.C, self.lam, self.Y)

    @property
    def big_jump_rate(self):
        return self._table[0]

    @property
    def small_jump_variance(self):
        return float(self.measure.m2(self.eps))

    @property
    def triplet(self):
        return LevyTriplet(0.0, 0.0, self.measure)

    @property
    def is_compound_poisson(self):
        return not self.gaussian_small_jumps

    def sample(self, grid, rng):
        rate, levels, z = self._table
        n = rng.poisson(rate * grid.T)
        times = np.sort(rng.uniform(0.0, grid.T, n))
        mag = np.interp(rng.random(n), levels, z)
        sizes = np.where(rng.random(n) < 0.5, -mag, mag)
        extra = None
        if self.gaussian_small_jumps:
            extra = rng.normal(0.0, np.sqrt(self.small_jump_variance * grid.dt), grid.n)
        return DriverPath(grid, 0.0, np.zeros(grid.n), times, sizes, extra=extra)

    def moments(self):
        return 0.0, float(self.measure.second_moment())


def sample_increments(driver, grid, seed):
    """Exact-law increments of ``driver`` on ``grid``; pure in ``seed``."""
    return driver.sample(grid, as_generator(seed))


def moments(driver):
    """``(mean rate, variance rate)`` of ``L(1)``."""
    return driver.moments()


# --------------------------------------------------------------------------
# integrability


@dataclass(frozen=True)
class ConditionValue:
    name: str
    value: float
    finite: bool
    trend: tuple = ()


@dataclass(frozen=True)
class IntegrabilityReport:
    t: float
    gaussian: ConditionValue
    jump: ConditionValue
    drift: ConditionValue
    square_integrable: ConditionValue | None = None

    @property
    def conditions(self):
        out = [self.gaussian, self.jump, self.drift]
        if self.square_integrable is not None:
            out.append(self.square_integrable)
        return out

    @property
    def all_finite(self):
        return all(c.finite for c in self.conditions)

    def diverging(self):
        return [c.name for c in self.conditions if not c.finite]


def _pointwise_terms(triplet, phi):
    """Integrands of the three conditions at the values ``phi``."""
    phi = np.asarray(phi, float)
    gauss = triplet.c2 * phi**2
    lm = triplet.levy_measure
    if lm is None:
        return gauss, np.zeros(phi.shape), np.abs(phi * triplet.gamma)
    a = np.where(phi != 0, 1.0 / np.abs(phi), np.inf)
    with np.errstate(invalid="ignore", over="ignore"):
        jump = np.where(phi != 0, lm.tail(a) + phi**2 * lm.m2(a), 0.0)
        drift = np.where(
            phi != 0, phi * triplet.gamma + phi * lm.m1(a) - phi * float(lm.m1(1.0)), 0.0
        )
    return gauss, jump, np.abs(drift)


def _refined_integral(values_at, t, levels=(8, 9, 10, 11, 12, 13)):
    # midpoint sums on dyadic refinements; extrapolate when differences decay
    sums = []
    for k in levels:
        n = 2**k
        s = (np.arange(n) + 0.5) * (t / n)
        with np.errstate(all="ignore"):
            sums.append(float(np.sum(values_at(s)) * t / n))
    sums = np.array(sums)
    if not np.all(np.isfinite(sums)):
        return np.inf, False, tuple(sums)
    d = np.diff(sums)
    if np.all(np.abs(d) <= 1e-14 * max(1.0, abs(sums[-1]))):
        return sums[-1], True, tuple(sums)
    r = d[1:] / np.where(d[:-1] != 0, d[:-1], np.nan)
    r_last = r[-1]
    if np.isfinite(r_last) and 0 < r_last < 0.95 and np.all(np.abs(r[-2:] - r_last) < 0.1):
        return sums[-1] + d[-1] * r_last / (1 - r_last), True, tuple(sums)
    converged = abs(d[-1]) <= 1e-10 * max(1.0, abs(sums[-1]))
    return (sums[-1] if converged else np.inf), converged, tuple(sums)


def check_integrability(driver, integrand, t, grid=None):
    """Evaluate the three integrability conditions for ``phi(s)`` on ``[0, t]``.

    ``integrand`` is either a vectorised callable ``s -> phi(s)`` (evaluated
    on dyadic refinements, with the trend of the partial sums deciding
    finiteness) or an array of left-point samples on ``grid``.  Never raises.
    """
    trip = driver.triplet
    try:
        mean_rate, var_rate = driver.moments()
        sq = var_rate if mean_rate == 0.0 else None
    except Unsupported:
        sq = None
    names = ("gaussian", "jump", "drift")
    results = []
    if callable(integrand):
        for i, name in enumerate(names):
            val, ok, trend = _refined_integral(lambda s: _pointwise_terms(trip, integrand(s))[i], t)
            results.append(ConditionValue(name, val, ok, trend))
        if sq is not None:
            val, ok, trend = _refined_integral(lambda s: sq * np.asarray(integrand(s), float) ** 2, t)
            results.append(ConditionValue("square_integrable", val, ok, trend))
    else:
        phi = np.asarray(integrand, float)
        if grid is None:
            raise DomainError("sampled integrands need their grid")
        k = int(np.searchsorted(grid.nodes, t - 1e-12 * grid.dt))
        phi = phi[:k]
        terms = _pointwise_terms(trip, phi)
        for name, term in zip(names, terms):
            val = float(np.sum(term) * grid.dt)
            results.append(ConditionValue(name, val, bool(np.isfinite(val))))
        if sq is not None:
            val = float(sq * np.sum(phi**2) * grid.dt)
            results.append(ConditionValue("square_integrable", val, bool(np.isfinite(val))))
    return IntegrabilityReport(t, *results)


# --------------------------------------------------------------------------
# config


def driver_from_config(block):
    block = dict(block)
    kind = block.pop("kind", None)
    if kind == "Brownian":
        return Brownian(block.get("c2", 1.0), block.get("drift", 0.0))
    if kind == "CompensatedCompoundPoisson":
        return CompensatedCompoundPoisson(
            block["rate"], jump_law_from_config(block["jump_law"]), block.get("c2", 0.0)
        )
    if kind == "Subordinator":
        fam = block.pop("family", None)
        if fam == "Gamma":
            return GammaSubordinator(block["shape_rate"], block["scale"])
        if fam == "InverseGaussian":
            return InverseGaussianSubordinator(block["delta"], block["gamma"])
        if fam == "CompoundPoissonPositive":
            return CompoundPoissonPositive(block["rate"], jump_law_from_config(block["jump_law"]))
        raise DomainError(f"unknown subordinator family {fam!r}")
    if kind == "TruncatedSeries":
        return TruncatedSeries(
            block["C"], block["lam"], block["Y"], block.get("eps", 1e-3),
            block.get("gaussian_small_jumps", True),
        )
    raise DomainError(f"unknown driver kind {kind!r}")
