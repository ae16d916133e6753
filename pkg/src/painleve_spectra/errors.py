"""Exception hierarchy shared by all modules."""


class PainleveSpectraError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PainleveSpectraError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class PoleError(DomainError):
    """Evaluation point sits on (or numerically at) a pole of a closed form."""


class ConfigError(PainleveSpectraError, ValueError):
    """Inconsistent or invalid parameter bundle."""


class IntegrationHalted(PainleveSpectraError):
    """ODE integration stopped early; ``partial`` holds what was computed.

    ``partial`` is a P4Solution with the samples reached before the halt, or
    None when nothing beyond the initial condition was accepted.
    """

    def __init__(self, message, z, partial=None):
        super().__init__(message)
        self.z = z
        self.partial = partial


class PoleEscape(IntegrationHalted):
    """|f| exceeded the escape threshold; ``z`` is the estimated pole location."""


class ZeroCrossing(IntegrationHalted):
    """f reached zero where the 1/f term of the ODE cannot be regularised."""


class InconsistentError(PainleveSpectraError):
    """Two routes that should differ by a constant do not."""


class SingularWavefunction(PainleveSpectraError):
    """A zero-mode candidate blows up at an interior point."""


class GridTooCoarse(PainleveSpectraError, ValueError):
    """Grid has fewer points than an operation requires."""


class SingularPotential(PainleveSpectraError, ValueError):
    """Potential is non-finite or huge on a grid node."""


class ConvergenceError(PainleveSpectraError):
    """An iterative solver failed; ``level`` is the offending eigen-index."""

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class BudgetExceeded(PainleveSpectraError):
    """Grid refinement ran past its size budget before meeting tolerance."""
