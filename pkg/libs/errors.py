"""
Domain errors for the generalized-drift toolkit.

Every error raised by the library derives from GeneralizedDriftError and
carries the offending values as attributes so callers (and the CLI) can
report them without parsing messages.
"""

from __future__ import annotations


class GeneralizedDriftError(Exception):
    """Base exception for all library errors."""

    pass


class ConfigurationError(GeneralizedDriftError):
    """Configuration file could not be read or is inconsistent."""

    pass


class InvalidMeasure(GeneralizedDriftError):
    """Atom or density data cannot form a drift measure."""

    pass


class InvalidInterval(GeneralizedDriftError):
    """Interval with left endpoint greater than right endpoint."""

    def __init__(self, left: float, right: float):
        self.left = left
        self.right = right
        super().__init__(f"Invalid interval: left={left} > right={right}")


class RequiresAtomCondition(GeneralizedDriftError):
    """Atom violates the strict atom condition needed to remove the drift."""

    def __init__(self, location: float, weight: float, convention: str):
        self.location = location
        self.weight = weight
        self.convention = convention
        super().__init__(
            f"Atom at {location} with weight {weight} violates the strict "
            f"atom condition for {convention} local time"
        )


class OutOfRange(GeneralizedDriftError):
    """Value outside the range of the space transform."""

    def __init__(self, value: float):
        self.value = value
        super().__init__(f"Value {value} is outside the range of G")


class ConversionUndefined(GeneralizedDriftError):
    """Atom weight lies in the exclusion set of a convention conversion."""

    def __init__(self, location: float, weight: float, source: str, target: str):
        self.location = location
        self.weight = weight
        self.source = source
        self.target = target
        super().__init__(
            f"Cannot convert atom at {location} with weight {weight} "
            f"from {source} to {target} local time"
        )


class NoSolutionAtStart(GeneralizedDriftError):
    """The initial point admits no solution (strict violation with b != 0)."""

    def __init__(self, location: float, weight: float):
        self.location = location
        self.weight = weight
        super().__init__(
            f"No solution started at {location}: atom weight {weight} "
            f"violates the atom condition and b({location}) != 0"
        )


class IllPosedScenario(GeneralizedDriftError):
    """Simulation setup that the dispatch rules refuse to approximate."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class InvalidParameter(GeneralizedDriftError):
    """Numeric parameter outside its admissible range."""

    def __init__(self, name: str, value: object, requirement: str = ""):
        self.name = name
        self.value = value
        message = f"Invalid value for {name}: {value}"
        if requirement:
            message += f" ({requirement})"
        super().__init__(message)


class InsufficientPathData(GeneralizedDriftError):
    """Path lacks data required by an estimator."""

    def __init__(self, field: str):
        self.field = field
        super().__init__(f"Path is missing required data: {field}")


class ConvergenceError(GeneralizedDriftError):
    """Iterative solver did not reach its stopping tolerance."""

    pass


class UnknownScenario(GeneralizedDriftError):
    """Scenario name not present in the registry."""

    def __init__(self, name: str, available: list[str] | None = None):
        self.name = name
        self.available = available or []
        message = f"Unknown scenario: {name}"
        if self.available:
            message += f". Available: {', '.join(self.available)}"
        super().__init__(message)
