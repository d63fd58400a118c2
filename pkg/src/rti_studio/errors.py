"""Error classes shared across the toolkit.

Each class maps to a distinct CLI exit code (see cli.EXIT_CODES).
"""


class RtiStudioError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(RtiStudioError):
    """Bad mission configuration or malformed input file."""


class DegenerateGeometryError(RtiStudioError):
    """Coincident points or otherwise undefined geometric quantity."""


class InvalidRegionError(RtiStudioError):
    """Scan region with an empty or inverted angular window."""


class InfeasibleStepError(RtiStudioError):
    """No control candidate satisfies the hard constraints.

    Carries the name of the violated constraint in ``constraint``.
    """

    def __init__(self, message, constraint=None):
        super().__init__(message)
        self.constraint = constraint


class IllConditionedLightingError(RtiStudioError):
    """Lighting geometry too degenerate for a stable per-pixel fit."""


class UndefinedMeanError(RtiStudioError):
    """Normal-map comparison with no mutually valid pixels."""
