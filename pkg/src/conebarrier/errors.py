"""Exception types shared across the package."""


class ConeBarrierError(Exception):
    """Base class for all package errors."""


class BoundaryError(ConeBarrierError):
    """A point that must be strictly interior to the cone is not."""


class FactorizationError(ConeBarrierError):
    """A Cholesky factorization failed (non-positive pivot)."""


class ParamError(ConeBarrierError):
    """A solver or algorithm parameter violates its admissible range."""


class ZeroGradient(ConeBarrierError):
    """The right-hand side of the damped Newton system is zero."""


class ZeroDirection(ConeBarrierError):
    """A direction that must be nonzero is zero."""


class HardCapExceeded(ConeBarrierError):
    """The capped CG safety cap was hit; usually a broken symmetry contract."""


class LineSearchFailure(ConeBarrierError):
    """Backtracking exhausted the trial budget without sufficient decrease."""


class InfeasibleStart(ConeBarrierError):
    """The starting point is not strictly feasible."""


class DivergenceError(ConeBarrierError):
    """Iterates diverged; the objective may be unbounded below on the feasible set."""


class UnknownProblem(ConeBarrierError):
    """Requested builtin problem name does not exist."""


class ParseError(ConeBarrierError):
    """A problem file could not be parsed."""


class SchemaError(ConeBarrierError):
    """A problem file parsed but violates the schema."""


class SizeError(ConeBarrierError):
    """Dense certification requested beyond the desk-scale limit."""


class ConeMismatch(ConeBarrierError):
    """A scaling matrix does not map the cone onto itself."""
