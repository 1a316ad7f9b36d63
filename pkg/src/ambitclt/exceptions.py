"""Exception and warning types raised across the package."""


class AmbitCLTError(Exception):
    """Base class for all package errors."""


class ValidationError(AmbitCLTError, ValueError):
    """Invalid user input (parameters, configuration, shapes)."""


class NumericFailure(AmbitCLTError, ArithmeticError):
    """A numerical routine could not deliver a trustworthy result."""


class RequestUnavailable(ValidationError):
    """A moment functional was requested that is not defined for the basis."""


class ConditionViolated(ValidationError):
    """The scalar-product separation condition fails for a sphere of influence."""


class UnsupportedShape(ValidationError):
    """No integration-domain parameterization exists for this shape."""


class ParameterOutOfRange(ValidationError):
    """Model parameters outside the admissible range."""


class Diverges(NumericFailure):
    """An integral claimed to be finite diverges."""


class MomentUnavailable(ValidationError):
    """Moment preconditions fail for the requested quantity."""


class DoubleIntegralBudgetExceeded(NumericFailure):
    """Tensor quadrature budget exhausted; carries a partial value and bound."""

    def __init__(self, message, partial=None, bound=None):
        super().__init__(message)
        self.partial = partial
        self.bound = bound


class NotSummable(NumericFailure):
    """Autocovariances are not summable over the lattice."""


class CaseInapplicable(ValidationError):
    """Preconditions of a coefficient-bound case are violated."""


class HorizonNotReached(ValidationError):
    """The requested lag lies below the independence horizon."""


class ExponentInvalid(ValidationError):
    """Hereditary exponent parameters outside 1 <= a < p."""


class ShiftTooLarge(ValidationError):
    """No grid point satisfies the shift condition psi(h) > k."""


class NoPolynomialFit(NumericFailure):
    """A curve has no usable polynomial decay fit."""


class PlanBiasTooLarge(ValidationError):
    """Simulation plan bias exceeds the requested tolerance."""


class DegenerateDomain(ValidationError):
    """Simulation domain has zero volume or no lattice points."""


class VarianceUnavailable(ValidationError):
    """No standardizing variance is available."""


class TooFewValues(ValidationError):
    """Not enough values for a normality test."""


class NotConverged(NumericFailure):
    """Optimizer did not converge; carries the best point found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class IdentifiabilityWarning(UserWarning):
    """Moment conditions are (nearly) unable to identify the parameters."""
