"""Exception types shared across the package.

Every error the command line maps to an exit code lives here, so callers can
catch one module's failures without importing its internals.
"""


class TecsimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TecsimError):
    """Scenario description is malformed (schema, expression, layout...).

    CLI exit code 4.
    """


class SchemaError(ConfigError):
    """Unknown key, wrong type, or missing required entry in a config table."""


class ExpressionParseError(ConfigError):
    """A coefficient/data expression string failed to parse or validate."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class LayoutMisaligned(ConfigError):
    """A boundary-region breakpoint does not land on a mesh grid line."""


class StepCountTooSmall(ConfigError):
    """Time-step count M does not exceed the horizon T (bound factor blows up)."""


class StepTooLarge(TecsimError, ValueError):
    """tau*L >= 1: the implicit recursion loses its contraction factor and no
    finite growth envelope exists."""


class NoExactSolution(ConfigError):
    """A convergence study was requested but the scenario declares no exact
    solution expressions to measure against."""


class SmallnessViolated(TecsimError):
    """A parabolicity margin (L_j)_# is non-positive; stepping refused.

    CLI exit code 2 (unless forced).
    """

    def __init__(self, report):
        self.report = report
        failed = ", ".join(name for name, _, ok in report.conditions if not ok)
        super().__init__(f"smallness conditions failed: {failed}")


class BoundViolation(TecsimError):
    """Sampled coefficient value escapes its declared envelope."""


class MissingBound(TecsimError):
    """A declared-bounds field required by the audit is absent."""


class PicardDiverged(TecsimError):
    """The within-step fixed-point iteration failed at every damping level.

    CLI exit code 3.  Carries enough context to report without adjudicating
    which structural hypothesis was violated.
    """

    def __init__(self, step, time, attempts):
        self.step = step
        self.time = time
        #: list of (damping, iterations, last_increment) per restart
        self.attempts = attempts
        last = attempts[-1] if attempts else (float("nan"),) * 3
        super().__init__(
            f"fixed-point iteration diverged at step {step} (t={time:g}); "
            f"final damping {last[0]:g} gave increment {last[2]:.3e} "
            f"after {last[1]} iterations"
        )


class SingularSystem(TecsimError):
    """Block linear solve failed or returned a non-finite/garbage solution."""


class EigenNoConvergence(TecsimError):
    """Constant-estimation eigen iteration exhausted its iteration budget."""


class NonFiniteValue(TecsimError):
    """A coefficient, datum, or assembled entry evaluated to nan/inf."""
