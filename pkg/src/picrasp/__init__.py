"""Reliability acceptance sampling plans for progressive Type-I interval
censored life tests with (possibly dependent) competing failure causes."""
from ._accel import BACKEND
from .errors import (
    BudgetInfeasibleError,
    ConditioningError,
    ConfigError,
    ConvergenceError,
    DataValidationError,
    DegenerateHypothesesError,
    DesignSingularError,
    ParameterDomainError,
    PicraspError,
    RiskSpecificationError,
)
from .model import ModelParams, reliability

__version__ = "0.1.0"
