class TGSpecError(Exception):
    """Base class for every error raised by tgspec."""


class DomainError(TGSpecError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConvergenceError(TGSpecError):
    """An iterative refinement did not reach its tolerance."""


class EvaluationError(TGSpecError):
    """A user-supplied function returned a non-finite value."""


class DimensionError(TGSpecError, ValueError):
    """Matrix or vector dimensions are inconsistent."""


class SizingError(TGSpecError):
    """The requested discretization is too large to assemble densely."""


class InfeasibleConstraints(TGSpecError):
    """The equality constraints of a QP cannot be satisfied."""


class SingularSystem(TGSpecError):
    """The KKT system could not be factorized even after regularization."""


class RankDeficientOutputs(TGSpecError):
    """The sampled outputs do not determine a unique feedback gain."""


class ProblemFormatError(TGSpecError, ValueError):
    """A problem file could not be read or is malformed."""
