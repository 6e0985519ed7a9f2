"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ``ValidationError`` -> 2,
``NumericalError`` (and subclasses) -> 3.  Non-convergence of the
iterative solver is *not* an exception; it is reported through the run
diagnostics so that partial output can still be written (exit code 4).
"""


class AggidError(Exception):
    """Base class for all package errors."""


class ValidationError(AggidError):
    """Bad configuration or arguments detected before any computation."""


class NumericalError(AggidError):
    """Computation failed (blow-up, singular system, degenerate data)."""


class BlowUpError(NumericalError):
    """Forward solve produced non-finite values.

    Attributes:
        frame: index of the first time frame with non-finite values.
    """

    def __init__(self, message, frame):
        super().__init__(message)
        self.frame = int(frame)


class SingularSystemError(NumericalError):
    """A linear system in the identification pipeline was singular."""


class StabilityWarning(UserWarning):
    """Forward solve amplitude grew beyond the configured factor."""
