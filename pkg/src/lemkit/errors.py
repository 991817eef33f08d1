"""Exception types shared across the pipeline stages."""


class LemkitError(Exception):
    """Base class for all errors raised by this package."""


class RecipeError(LemkitError):
    """Malformed masking recipe string; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class TagFileError(LemkitError):
    """Malformed tag file; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"{message} (line {line_number})")
        self.line_number = line_number


class AlignmentError(LemkitError):
    """Word/token/id bookkeeping disagrees between two inputs."""


class TruncationError(LemkitError):
    """A concatenated pair exceeds the configured sequence length."""


class FormatError(LemkitError):
    """A binary or structured file does not match its declared layout."""


class ConfigError(LemkitError):
    """A configuration value is outside its valid range."""


class ManifestError(LemkitError):
    """A pipeline input no longer matches the hash recorded for it."""
