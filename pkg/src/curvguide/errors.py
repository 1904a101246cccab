"""Exception hierarchy.

Input problems derive from ``ValidationError`` (also a ``ValueError``);
failures of a numerical procedure derive from ``NumericalError``. The CLI
maps the two families onto distinct exit codes.
"""


class CurvguideError(Exception):
    """Base class for all package errors."""


class ValidationError(CurvguideError, ValueError):
    """Bad user input: a configuration key, a flag or a precondition."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class NumericalError(CurvguideError, RuntimeError):
    """A numerical procedure could not produce a valid result."""


class InfeasibleDesign(NumericalError):
    """Transverse energy along the imposed trajectory exceeds the kinetic energy."""


class NoBracket(NumericalError):
    """No sign change was found while bracketing a root."""


class BranchLoss(NumericalError):
    """Continuation lost the physical root branch."""

    def __init__(self, t, window):
        self.t = t
        self.window = window
        super().__init__(
            f"no continuous root at t={t:.6g} within kappa window [{window[0]:.6g}, {window[1]:.6g}]"
        )


class MetricSingularity(NumericalError):
    """The metric factor h = 1 - kappa*y reached zero or dropped below its floor."""


class IntegrationTimeout(NumericalError):
    """The integration hit its safety cap before reaching the stop position."""


class TridiagonalBreakdown(NumericalError):
    """A zero pivot appeared in a tridiagonal solve."""


class NotInStraightRegion(CurvguideError):
    """A figure of merit was requested while the packet still overlaps the bend."""
