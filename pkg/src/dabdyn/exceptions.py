"""Exception types raised by the toolkit."""


class DabError(Exception):
    """Base class for all toolkit errors."""


class DomainError(DabError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularLoadError(DabError, ValueError):
    """A constant-power load was evaluated at a non-positive output voltage."""


class SingularSystemError(DabError, ArithmeticError):
    """A linear system that must be solved is (numerically) singular."""


class DegeneratePolynomialError(DabError, ValueError):
    """The leading coefficient of a polynomial is zero."""


class InfeasiblePowerError(DabError, ValueError):
    """The requested power cannot be delivered under first-harmonic operation."""


class ConvergenceError(DabError, RuntimeError):
    """An iterative routine hit its iteration cap.

    ``diagnostics`` carries whatever the routine knew at the time it gave up.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class IntegrationBlowupError(DabError, FloatingPointError):
    """Time integration produced a non-finite or runaway state.

    ``partial`` holds the trajectory computed up to the failure, when known.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
