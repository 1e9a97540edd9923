"""Exception types raised across the package."""


class DynsrError(ValueError):
    """Base class; ``code`` is the machine-readable tag the CLI prints."""

    code = "invalid-input"


class DimensionMismatchError(DynsrError):
    code = "dimension-mismatch"


class SeriesTooShortError(DynsrError):
    code = "series-too-short"


class InsufficientDirectionsError(DynsrError):
    code = "insufficient-directions"


class EnumerationCapError(DynsrError):
    code = "enumeration-cap"


class ConstructionNotVerifiedError(DynsrError):
    code = "construction-not-verified"


class ConfigError(DynsrError):
    code = "invalid-config"
