"""Exception types raised across the package."""


class HardyNLSError(Exception):
    """Base class for all package errors."""


class InvalidParams(HardyNLSError, ValueError):
    """Model parameters outside the admissible range."""


class StepFailure(HardyNLSError):
    """Adaptive integrator step size underflowed."""


class BracketInvalid(HardyNLSError):
    """Both ends of a shooting bracket terminate the same way."""


class NoConvergence(HardyNLSError):
    """An iterative solver exceeded its iteration cap."""


class NonDecrease(HardyNLSError):
    """The variational flow increased the quotient it is meant to minimize."""


class GridTooCoarse(HardyNLSError):
    """Finite differences do not resolve the quantity being checked."""


class SolverDiverged(HardyNLSError):
    """Fixed-point iteration in the time stepper failed to contract."""


class MassMismatch(HardyNLSError):
    """Profile mass differs from the ground-state mass."""


class ParamsMismatch(HardyNLSError, ValueError):
    """Ground state was computed for different model parameters."""


class MalformedCsv(HardyNLSError, ValueError):
    """A profile CSV could not be parsed."""


class NonMonotoneGrid(HardyNLSError, ValueError):
    """Radial nodes are not strictly increasing."""
