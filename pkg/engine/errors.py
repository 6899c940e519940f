"""Typed failures raised by the numerical core and the CLI layer."""


class ReflDiffError(Exception):
    """Base class for every refldiff failure."""


class DensityUnderflowError(ReflDiffError, ArithmeticError):
    """A density fell below the underflow floor where a score needs it."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context or {}


class BoundaryDegeneracyError(ReflDiffError, ValueError):
    """A simplex point sits on a face where the stick-breaking inverse divides by ~0."""


class NonFiniteError(ReflDiffError, FloatingPointError):
    """NaN or inf appeared in a score, loss or gradient.

    `context` carries whatever locates the failure: step index, t,
    the offending point, or the parameter block name.
    """

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context or {}


class StepSizeUnderflowError(ReflDiffError):
    """The adaptive ODE integrator could not make progress."""

    def __init__(self, message, t_reached=None):
        super().__init__(message)
        self.t_reached = t_reached


class ConfigError(ReflDiffError, ValueError):
    """Malformed or out-of-range run configuration."""


class MissingArtifactError(ReflDiffError, FileNotFoundError):
    """A checkpoint or other input artifact does not exist."""
