"""Exception types shared across the package.

Each error carries an ``exit_code`` so the CLI can map failures without a
lookup table: 1 = run violated safety / operating envelope, 2 = bad
configuration, 3 = safety filter infeasible.
"""


class SafeControlError(Exception):
    exit_code = 1

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConfigurationError(SafeControlError, ValueError):
    exit_code = 2


class UnknownPreset(ConfigurationError, KeyError):
    def __str__(self):
        return self.args[0]


class GainConditionViolated(ConfigurationError):
    pass


class InitialConditionFailed(ConfigurationError):
    pass


class NonFiniteDerivative(SafeControlError, ArithmeticError):
    pass


class SingularJacobian(SafeControlError):
    pass


class TrackingErrorEscaped(SafeControlError):
    pass


class SafetyViolation(SafeControlError):
    pass


class BoundViolated(SafeControlError):
    pass


class Infeasible(SafeControlError):
    exit_code = 3


class DegenerateConstraint(Infeasible):
    pass


class SafetyFilterInfeasible(Infeasible):
    pass
