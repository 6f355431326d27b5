"""Exception types shared across the package."""


class LpRnnError(Exception):
    """Base class for all package errors."""


class ShapeError(LpRnnError, ValueError):
    """Operand shapes are inconsistent."""


class DomainError(LpRnnError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateInputError(LpRnnError, ValueError):
    """Input is structurally degenerate (e.g. a zero spectrum)."""


class PreconditionError(LpRnnError, ValueError):
    """A documented precondition on the inputs does not hold."""


class SolverError(LpRnnError, ArithmeticError):
    """A linear solve failed (singular or numerically singular system)."""


class MappingError(LpRnnError, ValueError):
    """A network cannot be mapped onto the spiking substrate."""


class DivergenceError(LpRnnError, ArithmeticError):
    """A simulation or training run produced non-finite values."""


class ConfigError(LpRnnError, ValueError):
    """An experiment configuration failed validation."""


class CheckpointError(LpRnnError, ValueError):
    """A checkpoint file is malformed or of an unsupported version."""


class ConvergenceWarning(UserWarning):
    """An iterative method stopped before meeting its tolerance."""
