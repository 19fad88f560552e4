"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class LavgapError(Exception):
    exit_code = 1
    kind = "error"


class ParameterError(LavgapError, ValueError):
    """Out-of-range or inconsistent parameters."""

    exit_code = 3
    kind = "parameter"


class ResourceLimitError(LavgapError):
    """A requested generation or grid exceeds the configured storage cap."""

    exit_code = 4
    kind = "resource-limit"


class SingularInputError(LavgapError, ValueError):
    """Evaluation requested on the apex set where a field is undefined."""

    exit_code = 5
    kind = "singular-input"


class RegimeError(LavgapError):
    """Operation requested for the wrong regime, or a condition the theory does not state."""

    exit_code = 6
    kind = "regime"


class DivergenceError(LavgapError):
    """An energy needed downstream diverges (or is non-finite)."""

    exit_code = 7
    kind = "divergence"


class ConfigError(LavgapError):
    """Malformed configuration text; ``line`` is 1-based when known."""

    exit_code = 8
    kind = "config"

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class BoundaryMismatchError(LavgapError):
    """A test field violates the boundary precondition of a check."""

    exit_code = 9
    kind = "boundary"
