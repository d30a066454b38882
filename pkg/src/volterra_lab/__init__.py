"""Simulation and integration toolkit for Volterra-driven Levy processes.

``X(t) = int_0^t g(t, s) sigma(s) dL(s)`` with a deterministic kernel ``g``,
predictable volatility ``sigma`` and a Levy driver ``L``; the ``K_g`` kernel
transform turns ``int h dX`` into another Volterra integral.
"""

from .anticipative_integral import (
    IntegralResult,
    Method,
    integrate_deterministic,
    integrate_scaled,
    integrate_semimartingale,
    integrate_simple,
    ou_residual,
    ou_solution,
)
from .chaos import KtildeKernel, half_square_chaos, ktilde, second_chaos_integral, trace_term
from .errors import (
    ConfigError,
    DomainError,
    NonIntegrable,
    NotLipschitz,
    NotSemimartingale,
    NotShiftInvariant,
    PartitionMisaligned,
    RequiresBrownian,
    RequiresUnitVolatility,
    SchemeUnavailable,
    SingularDiagonal,
    Unsupported,
    VolterraError,
)
from .grid import SimulationGrid
from .integrands import Combination, ExpDecay, StepFunction, indicator
from .kernels import (
    CarmaShift,
    ConstantOne,
    ExpShift,
    FbmBracket,
    GammaShift,
    Tabulated,
    kernel_from_config,
)
from .kg_operator import (
    KgEvaluation,
    Scheme,
    kg_apply,
    kg_exp_closed,
    kg_shift,
    limit_condition,
    proof_form,
    resolvent_residual,
)
from .levy_drivers import (
    Brownian,
    CompensatedCompoundPoisson,
    CompoundPoissonPositive,
    GammaSubordinator,
    InverseGaussianSubordinator,
    TruncatedSeries,
    check_integrability,
    driver_from_config,
    sample_increments,
)
from .path_engine import VmlvPath, VmlvProcess, decompose, simulate, simulate_batch, variance_oracle
from .volatility import LevyOU, TwoSidedStationaryOU, sample_sigma_path, stationary_mean

__version__ = "0.1.0"
