"""Exception types raised across the package."""


class RobustUplinkError(Exception):
    """Base class for package errors."""


class DomainError(RobustUplinkError, ValueError):
    """A parameter lies outside its admissible range."""


class DegenerateCapacityError(RobustUplinkError, ValueError):
    """Backhaul capacities make a compression noise variance infinite."""


class SingularDenominatorError(RobustUplinkError, ArithmeticError):
    """The denominator matrix of a log-det form is not positive definite."""


class NoPositiveRootError(RobustUplinkError, ArithmeticError):
    """A quadratic has no unique positive root."""


class InfeasibleError(RobustUplinkError, RuntimeError):
    """No grid point satisfies the feasibility predicate."""


class SingularCovarianceError(RobustUplinkError, ArithmeticError):
    """A conditional covariance is singular, so the mutual information diverges."""


class ConfigError(RobustUplinkError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message, *, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
