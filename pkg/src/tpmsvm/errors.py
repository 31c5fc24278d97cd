"""Exception and warning types shared across the package."""


class TpmsvmError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(TpmsvmError):
    """An argument violates a structural precondition (shape, finiteness, rank)."""


class InvalidHyperparams(TpmsvmError):
    """The (nu, alpha) pair makes a training problem infeasible."""


class UnsupportedRadiusMapping(TpmsvmError):
    """No feature-space radius bound is implemented for this kernel/norm pair."""


class DegenerateClassifier(TpmsvmError):
    """A trained classifier came out with a zero normal vector; normalized
    distances would be undefined."""


class IndefiniteKernel(TpmsvmError):
    """A kernel matrix could not be repaired to positive semidefinite within
    the jitter budget."""


class ParseError(TpmsvmError):
    """A CSV cell failed to parse. Carries 1-based file line and column."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col


class SplitError(TpmsvmError):
    """A dataset cannot be split as requested (e.g. class with < 2 samples)."""


class HarnessError(TpmsvmError):
    """Every point of a hyperparameter grid failed to train."""

    def __init__(self, message: str, diagnostics: list | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class IoError(TpmsvmError):
    """A report or model file could not be written."""


class ConicSolveError(TpmsvmError):
    """A conic solve needed by a trainer did not reach an optimal status.

    The offending program and the raw solution are attached for debugging.
    """

    def __init__(self, message: str, program=None, solution=None):
        super().__init__(message)
        self.program = program
        self.solution = solution


class NumericsWarning(UserWarning):
    """A matrix needed a PSD repair or jitter before factorization."""


class TrainingWarning(UserWarning):
    """A trainer fell back to a secondary rule (e.g. empty interior set)."""


class DataWarning(UserWarning):
    """A data transformation hit a degenerate case (e.g. constant feature)."""
