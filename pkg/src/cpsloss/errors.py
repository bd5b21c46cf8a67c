"""Exception hierarchy shared by all modules."""


class CpsLossError(Exception):
    """Base class for toolkit errors."""


class InvalidParameterError(CpsLossError, ValueError):
    """A parameter is non-finite or outside its valid domain."""


class InvalidInputError(CpsLossError, ValueError):
    """Input data is malformed or violates a precondition."""


class NoResonanceError(CpsLossError):
    """No resonance feature stands out of the trace noise."""


class ConvergenceError(CpsLossError):
    """An iterative fit did not converge.

    ``best`` carries the best parameters reached before giving up.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class IllPosedFitError(CpsLossError):
    """The data cannot constrain the requested model."""


class EmptySelectionError(CpsLossError):
    """A filter left no data points to work with."""


class ResolutionError(CpsLossError):
    """A layer is too thin for the mesh to resolve."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class NonlinearRegimeError(CpsLossError):
    """Participation per unit thickness is not thickness independent."""


class IllConditionedError(CpsLossError):
    """A linear system is numerically singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NoRegrowthSignalError(CpsLossError):
    """Observed frequency shifts carry no regrowth signature."""


class NonPhysicalError(CpsLossError):
    """A derived quantity would be non-physical."""


class UnderdeterminedError(CpsLossError):
    """Fewer equations than unknowns."""


class ParseError(CpsLossError):
    """A data file could not be parsed."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class DependencyError(CpsLossError):
    """A pipeline stage is missing its upstream output."""
