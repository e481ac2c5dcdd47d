"""Exception types shared across the toolkit."""


class ErgodicaError(Exception):
    """Base class for toolkit errors."""


class InputError(ErgodicaError, ValueError):
    """Bad argument to an operation (non-symmetric matrix, nonpositive vector, ...)."""


class ConfigError(ErgodicaError):
    """Malformed or inconsistent configuration."""


class AssemblyError(ErgodicaError):
    """A discretization could not be assembled as a monotone operator."""


class SolverError(ErgodicaError):
    """A linear or nonlinear solve failed or did not converge."""


class IterationError(SolverError):
    """An iterative method exceeded its budget or cycled."""
