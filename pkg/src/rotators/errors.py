"""Exception hierarchy.

Every error carries a short machine-readable ``code`` used by the command
line front end (``error:<code>: message``).
"""


class RotatorError(Exception):
    code = "rotator"


class NonRotatingState(RotatorError, ValueError):
    """|ndot| = 0 where the |ndot| term of the Lagrangian is active."""

    code = "non_rotating_state"


class NonFiniteEvaluation(RotatorError, ArithmeticError):
    code = "non_finite_evaluation"


class DegenerateSystem(RotatorError, ValueError):
    """Operation requires a2 != a1**2."""

    code = "degenerate_system"


class NonDegenerateSystem(RotatorError, ValueError):
    """Operation requires a2 == a1**2."""

    code = "non_degenerate_system"


class DegenerateLegendreMap(DegenerateSystem):
    code = "degenerate_legendre_map"


class SignConditionViolated(RotatorError, ValueError):
    code = "sign_condition_violated"


class IndeterminateDynamics(DegenerateSystem):
    """Accelerations are not determined by positions and velocities."""

    code = "indeterminate_dynamics"


class ConstraintViolatedAtStart(RotatorError, ValueError):
    code = "constraint_violated_at_start"


class ConstraintViolated(RotatorError, RuntimeError):
    """The Lorentz constraint drifted during a degenerate charged run."""

    code = "constraint_violated"


class UnsupportedDegenerateField(RotatorError, NotImplementedError):
    code = "unsupported_degenerate_field"


class ZeroDenominator(RotatorError, ZeroDivisionError):
    code = "zero_denominator"


class DomainExceeded(RotatorError, ValueError):
    code = "domain_exceeded"


class FrequencySignViolation(RotatorError, ValueError):
    code = "frequency_sign_violation"


class GaugeMismatch(RotatorError, ValueError):
    """Gauge frequency does not match |ndot| of the initial state."""

    code = "gauge_mismatch"


class ConfigError(RotatorError, ValueError):
    code = "config"


class ParseError(ConfigError):
    code = "parse_error"

    def __init__(self, msg, line=None, column=None):
        if line is not None:
            msg = f"{msg} (line {line}, column {column})"
        super().__init__(msg)
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    code = "validation_error"

    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = path
