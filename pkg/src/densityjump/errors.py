"""Exception hierarchy shared by the estimators and the CLI."""


class DensityJumpError(Exception):
    """Base class for all package errors."""


class DomainError(DensityJumpError, ValueError):
    """An argument lies outside the domain of a function."""


class ConvergenceError(DensityJumpError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class DegenerateTruncationError(DensityJumpError, ArithmeticError):
    """The truncated kernel has (numerically) no mass on its side of the cutoff."""


class OneSidedSampleError(DensityJumpError, ValueError):
    """The sample has no observations on one side of the cutoff."""


class DegeneratePilotError(DensityJumpError, ArithmeticError):
    """The oversmoothed pilot estimate vanishes while the undersmoothed one does not."""


class DegenerateVarianceError(DensityJumpError, ArithmeticError):
    """The variance estimate is zero, so the test statistic is undefined."""


class SubsampleError(DensityJumpError, ValueError):
    """The sample cannot be split into the requested sub-samples."""


class SimulationError(DensityJumpError, RuntimeError):
    """A Monte Carlo cell lost too many replications to degeneracies."""


class IngestionError(DensityJumpError, ValueError):
    """Input data could not be read as a column of nonnegative numbers."""
