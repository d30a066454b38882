"""Uniform power-of-two simulation grid."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PartitionMisaligned


@dataclass(frozen=True)
class SimulationGrid:
    """Nodes ``t_k = k * T / n`` for ``k = 0..n``; ``n`` a power of two >= 2."""

    T: float
    n: int

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"grid horizon must be positive, got T={self.T}")
        n = int(self.n)
        if n != self.n or n < 2 or n & (n - 1):
            raise DomainError(f"grid size must be a power of two >= 2, got n={self.n}")

    @property
    def dt(self):
        return self.T / self.n

    @property
    def nodes(self):
        return np.arange(self.n + 1) * self.dt

    @property
    def left_points(self):
        return np.arange(self.n) * self.dt

    def node_index(self, t, tol=1e-9):
        """Index ``j`` with ``t_j == t``; raises if ``t`` is not a node."""
        x = t / self.dt
        j = int(round(x))
        if abs(x - j) > tol or not 0 <= j <= self.n:
            raise PartitionMisaligned(f"time {t} is not a node of {self}")
        return j

    def cell_of(self, times):
        """Cell index ``k`` with ``t_k <= time < t_{k+1}``."""
        k = np.floor(np.asarray(times, dtype=float) / self.dt).astype(np.int64)
        return np.clip(k, 0, self.n - 1)

    def coarsen(self, factor):
        if factor < 1 or self.n % factor:
            raise DomainError(f"cannot coarsen n={self.n} by {factor}")
        return SimulationGrid(self.T, self.n // factor)
