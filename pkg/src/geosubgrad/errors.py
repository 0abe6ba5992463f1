"""Exception types shared across the package."""


class GeoSubgradError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GeoSubgradError, ValueError):
    """An argument violates an operation's precondition."""


class ConfigurationError(GeoSubgradError, ValueError):
    """A descent or suite configuration is inadmissible for the problem."""


class NumericFailureError(GeoSubgradError, ArithmeticError):
    """A computation left the finite range or failed to converge.

    ``trace`` carries the partial result when the failure happened mid-run.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ContractViolation(GeoSubgradError, ValueError):
    """The caller broke an operation contract (e.g. step size at a zero subgradient)."""


class UnknownProblemError(GeoSubgradError, KeyError):
    def __init__(self, name, known):
        self.name = name
        self.known = tuple(known)
        super().__init__(name)

    def __str__(self):
        return (
            f"unknown problem {self.name!r}; registered: "
            + ", ".join(self.known)
            + ", abs_norm_d<dim>"
        )
