"""Exception types raised across the package."""


class ParameterError(ValueError):
    """Model parameters violate one or more invariants.

    ``violations`` lists every failed invariant by name, e.g.
    ``["nonpositive eta entry", "dimension mismatch"]``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericalOverflow(ArithmeticError):
    """A step produced a non-finite value (or an exact zero from a positive input)."""

    def __init__(self, index=None, message="numerical overflow"):
        self.index = index
        if index is not None:
            message = f"{message} at component {index}"
        super().__init__(message)


class LogDomainError(ValueError):
    """Logarithm of a nonpositive state component."""

    def __init__(self, message="log domain error"):
        super().__init__(message)


class IncompatibleStepError(ValueError):
    """Step size does not align with the dyadic Brownian grid."""

    def __init__(self, message="incompatible step size"):
        super().__init__(message)


class LevelTooLargeError(ValueError):
    def __init__(self, message="level too large"):
        super().__init__(message)


class KUndefinedError(ValueError):
    """The symplectic form K(Z) needs a strictly positive state."""

    def __init__(self, message="K undefined"):
        super().__init__(message)


class AnalyticJacobianUnavailable(ValueError):
    def __init__(self, message="analytic Jacobian unavailable"):
        super().__init__(message)


class NonDiagonalGammaError(ValueError):
    def __init__(self, message="symplectic form requires diagonal gamma"):
        super().__init__(message)


class ConfigError(ValueError):
    """Experiment configuration failed to parse or validate."""
