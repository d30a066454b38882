"""Predictable volatility processes ``sigma(s)``.

``sigma^2`` is either constant or a Levy-driven OU process

    sigma^2(t) = int e^{-beta (t - s)} dL_sigma(s)

started at zero, from (an approximation of) its stationary law, or as the
two-sided stationary integral truncated at ``-burn_in``.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError
from .grid import SimulationGrid
from .levy_drivers import Subordinator, as_generator, driver_from_config


class Initial(enum.Enum):
    ZERO = "Zero"
    STATIONARY = "Stationary"


class VolatilityModel:
    kind = "abstract"
    shared_jumps = False

    def sample(self, grid, rng, driver_path=None):
        raise NotImplementedError

    def stationary_mean(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(VolatilityModel):
    value: float = 1.0
    kind = "Constant"

    def __post_init__(self):
        if self.value < 0:
            raise DomainError("constant volatility must be nonnegative")

    def sample(self, grid, rng=None, driver_path=None):
        return np.full(grid.n, float(self.value))

    def stationary_mean(self):
        return float(self.value) ** 2


def _ou_update(sig2, decay, dt, beta, inc, times, sizes, cells, n):
    # exact for resolved jumps; unresolved increments get the mean-exact weight
    jump_part = np.zeros(n)
    if sizes.size:
        ends = (cells + 1) * dt
        np.add.at(jump_part, cells, np.exp(-beta * (ends - times)) * sizes)
    if inc is not None:
        jump_part = jump_part + (-np.expm1(-beta * dt) / (beta * dt)) * inc
    tail, _ = lfilter([1.0], [1.0, -decay], jump_part, zi=[decay * sig2])
    return np.concatenate(([sig2], tail))


@dataclass(frozen=True)
class LevyOU(VolatilityModel):
    """``sigma^2`` as an OU process driven by a subordinator."""

    beta: float
    subordinator: Subordinator
    initial: Initial = Initial.ZERO
    burn_in: float | None = None
    shared_jumps: bool = False
    kind = "LevyOU"

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError("LevyOU needs beta > 0")
        if not isinstance(self.subordinator, Subordinator):
            raise DomainError("LevyOU needs a subordinator driver")
        object.__setattr__(self, "initial", Initial(self.initial))
        if self.burn_in is not None and not self.burn_in > 0:
            raise DomainError("burn_in must be positive")

    @property
    def effective_burn_in(self):
        return self.burn_in if self.burn_in is not None else 10.0 / self.beta

    @property
    def metadata(self):
        md = {"beta": self.beta, "initial": self.initial.value}
        if self.initial is Initial.STATIONARY:
            b = self.effective_burn_in
            md["burn_in"] = b
            md["tail_bound"] = float(np.exp(-self.beta * b) * self.stationary_mean())
        return md

    def stationary_mean(self):
        mean_rate, _ = self.subordinator.moments()
        return float(mean_rate / self.beta)

    def _initial_value(self, grid, rng):
        if self.initial is Initial.ZERO:
            return 0.0
        b = self.effective_burn_in
        m = max(1, int(np.ceil(b / grid.dt)))
        pre = SimulationGrid(m * grid.dt, 1 << max(1, int(np.ceil(np.log2(m)))))
        path = self.subordinator.sample(pre, rng)
        # value at the end of the burn-in window, i.e. time 0
        return float(self._evolve(0.0, pre, path)[-1])

    def _evolve(self, sig2, grid, path):
        dt = grid.dt
        return _ou_update(
            sig2, np.exp(-self.beta * dt), dt, self.beta, path.extra,
            path.jump_times, path.jump_sizes, path.jump_cells, grid.n,
        )

    def sample_sigma2(self, grid, rng, driver_path=None):
        """``sigma^2`` at all nodes ``t_0..t_n``."""
        start = self._initial_value(grid, rng)
        if self.shared_jumps:
            if driver_path is None:
                raise DomainError("shared_jumps needs the driver path of X")
            if np.any(driver_path.jump_sizes < 0):
                raise DomainError("shared_jumps needs nonnegative jumps in the driver of X")
            path = driver_path
            return _ou_update(
                start, np.exp(-self.beta * grid.dt), grid.dt, self.beta, None,
                path.jump_times, path.jump_sizes, path.jump_cells, grid.n,
            )
        return self._evolve(start, grid, self.subordinator.sample(grid, rng))

    def sample(self, grid, rng, driver_path=None):
        return np.sqrt(self.sample_sigma2(grid, rng, driver_path)[:-1])


@dataclass(frozen=True)
class TwoSidedStationaryOU(LevyOU):
    """Stationary ``sigma^2(t) = int_{-inf}^t e^{-beta (t - s)} dL_sigma(s)``, cut at ``-burn_in``."""

    initial: Initial = field(default=Initial.STATIONARY, init=False)
    kind = "TwoSidedStationaryOU"


def sample_sigma_path(model, grid, seed, driver_path=None):
    """Left-point values ``sigma(t_k)``, ``k = 0..n-1``."""
    return model.sample(grid, as_generator(seed), driver_path)


def stationary_mean(model):
    """Stationary mean of ``sigma^2``; a constant model returns ``value**2``."""
    return model.stationary_mean()


def volatility_from_config(block):
    block = dict(block)
    kind = block.pop("kind", "Constant")
    if kind == "Constant":
        return Constant(block.get("value", 1.0))
    if kind not in ("LevyOU", "TwoSidedStationaryOU"):
        raise DomainError(f"unknown volatility kind {kind!r}")
    sub = driver_from_config(block["subordinator"])
    kw = {"burn_in": block.get("burn_in"), "shared_jumps": block.get("shared_jumps", False)}
    if kind == "LevyOU":
        return LevyOU(block["beta"], sub, Initial(block.get("initial", "Zero")), **kw)
    return TwoSidedStationaryOU(block["beta"], sub, **kw)

