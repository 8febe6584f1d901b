"""Error hierarchy shared by the services and the command line."""

from typing import Optional


class FdodeError(Exception):
    """Base class for every error raised by fdode."""


class InvalidArgumentError(FdodeError, ValueError):
    pass


class OutOfRangeError(InvalidArgumentError):
    pass


class UnsupportedError(FdodeError):
    pass


class ProblemFileError(FdodeError):
    """Problem file could not be turned into a valid problem.

    ``kind`` is one of ``syntax``, ``dimension``, ``unknown-function``,
    ``duplicate-index`` or ``validation``.
    """

    def __init__(
        self,
        message: str,
        kind: str = "syntax",
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        self.detail = message
        self.kind = kind
        self.line = line
        self.column = column
        location = ""
        if line is not None:
            location = f" (line {line}"
            if column is not None:
                location += f", column {column}"
            location += ")"
        super().__init__(f"{kind}: {message}{location}")


class NumericalFailureError(FdodeError):
    """Numerical procedure failed; ``module`` names where it happened."""

    module = "numerics"


class IntegrationOverflowError(NumericalFailureError):
    module = "linode"

    def __init__(self, t: float, interval: Optional[int] = None):
        self.t = t
        self.interval = interval
        where = f"t={t:.17g}"
        if interval is not None:
            where += f", interval {interval}"
        super().__init__(f"non-finite state during integration at {where}")

    def at_interval(self, interval: int) -> "IntegrationOverflowError":
        return IntegrationOverflowError(self.t, interval)


class StiffnessError(NumericalFailureError):
    module = "linode"


class HypothesisViolatedError(NumericalFailureError):
    module = "hypotheses"

    def __init__(self, message: str, deficit: Optional[float] = None):
        self.deficit = deficit
        if deficit is not None:
            message = f"{message} (deficit {deficit:.6g})"
        super().__init__(message)
