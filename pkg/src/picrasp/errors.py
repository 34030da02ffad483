"""Exception hierarchy. The CLI maps each family to an exit code."""


class PicraspError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(PicraspError, ValueError):
    """A model or scheme parameter lies outside its domain."""


class DataValidationError(PicraspError, ValueError):
    """Observed data violate the counting recursion or shape constraints."""


class ConfigError(PicraspError, ValueError):
    """A configuration document failed validation.

    ``errors`` holds every violation found, each prefixed with its JSON path.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class RiskSpecificationError(PicraspError, ValueError):
    """Producer/consumer risks do not admit a plan."""


class DegenerateHypothesesError(PicraspError, ValueError):
    """The two hypotheses give the same reliability at t0."""


class BudgetInfeasibleError(PicraspError):
    """No scheme satisfies the budget constraint."""

    def __init__(self, message, min_cost=None):
        self.min_cost = min_cost
        super().__init__(message)


class ConditioningError(PicraspError, ArithmeticError):
    """Survival underflowed or an interval probability degenerated to 0 or 1."""

    def __init__(self, message, interval=None):
        self.interval = interval
        super().__init__(message)


class DesignSingularError(PicraspError, ArithmeticError):
    """The Fisher information is singular (or the scheme cannot identify the model)."""


class ConvergenceError(PicraspError, RuntimeError):
    """Likelihood maximisation failed after all restarts."""
