"""Safe control of Euler-Lagrange systems with a proxy CBF filter and an adaptive BLF tracker."""

from .errors import (
    ConfigurationError,
    GainConditionViolated,
    Infeasible,
    InitialConditionFailed,
    SafeControlError,
    SafetyFilterInfeasible,
    SingularJacobian,
    TrackingErrorEscaped,
    UnknownPreset,
)
from .scenario import Scenario, preset

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "GainConditionViolated", "Infeasible", "InitialConditionFailed",
    "SafeControlError", "SafetyFilterInfeasible", "SingularJacobian", "TrackingErrorEscaped",
    "UnknownPreset", "Scenario", "preset",
]
