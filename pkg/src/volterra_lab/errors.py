"""Exception hierarchy shared by all modules."""


class VolterraError(Exception):
    """Base class for library errors."""


class DomainError(VolterraError, ValueError):
    """Arguments outside the domain of an operation (e.g. ``s >= t``)."""


class NotLipschitz(DomainError):
    """Integrand fails the Lipschitz-at-s probe required on singular diagonals."""


class NonIntegrable(VolterraError, ArithmeticError):
    """A quadrature estimate failed to settle under refinement."""


class Unsupported(VolterraError, NotImplementedError):
    """Operation is not available for this kernel/driver/model."""


class SchemeUnavailable(VolterraError):
    """Requested evaluation scheme does not apply to this kernel."""


class NotShiftInvariant(VolterraError):
    """Shift-kernel shortcut requested on a non shift-invariant kernel."""


class NotSemimartingale(VolterraError):
    """Kernel violates the conditions of the semimartingale decomposition."""


class SingularDiagonal(VolterraError):
    """Operation needs a finite kernel diagonal ``g(s, s)``."""


class PartitionMisaligned(VolterraError, ValueError):
    """Partition nodes do not coincide with simulation grid nodes."""


class RequiresBrownian(VolterraError):
    """Operation is only defined for a Brownian driver."""


class RequiresUnitVolatility(VolterraError):
    """Operation is only defined for sigma identically one."""


class ConfigError(VolterraError, ValueError):
    """Experiment configuration failed validation."""
