"""Exception types shared across the package."""


class LimbTrackError(Exception):
    """Base class for all package-specific errors."""


class GraphStructureError(LimbTrackError):
    """A graph, solution or constraint references nodes/edges inconsistently."""


class InfeasibleConstraintsError(LimbTrackError):
    """Must-link / must-cut constraints contradict each other.

    ``cycle`` holds the offending node chain: a must-link path whose two
    endpoints are also a must-cut pair.
    """

    def __init__(self, message, cycle=()):
        super().__init__(message)
        self.cycle = tuple(cycle)


class ParseError(LimbTrackError):
    """A file failed strict validation; carries path and line number."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:" if line is None else f"{path}:{line}:"
        super().__init__(f"{loc} {message}".strip())
        self.path = path
        self.line = line


class ConfigError(LimbTrackError):
    """Unknown or invalid configuration key/value."""
