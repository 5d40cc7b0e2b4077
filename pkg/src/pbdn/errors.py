"""Exception types raised across the package."""


class PbdnError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(PbdnError, ValueError):
    """A distribution or model parameter is outside its valid domain."""


class DegenerateWeightsError(PbdnError, ValueError):
    pass


class NumericalStabilityError(PbdnError, ArithmeticError):
    """A factorization failed even after diagonal jitter."""

    def __init__(self, message, hyperplane=None):
        super().__init__(message)
        self.hyperplane = hyperplane


class DimensionError(PbdnError, ValueError):
    pass


class ParseError(PbdnError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class LabelDomainError(PbdnError, ValueError):
    pass


class PartitionError(PbdnError, ValueError):
    pass
