"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: DataError -> 1, TransportError -> 2,
ParseError -> 3.
"""


class EngageKitError(Exception):
    """Base class for all toolkit errors."""


class DataError(EngageKitError):
    """Invalid domain data: broken invariants, bad files, bad configuration."""


class SchemaError(DataError):
    """A session or batch file violates its schema."""


class DictionaryMismatchError(DataError):
    """A label id or name is not part of the active action dictionary."""


class ContiguityError(DataError):
    """Segments do not tile the window (gap, overlap, or wrong order)."""


class ConfigError(DataError):
    """Invalid run configuration (missing endpoint, bad flag combination)."""


class ContextUnavailableError(DataError):
    """Classroom context was requested but there are no peers to derive it from."""


class DegenerateEmbeddingError(DataError):
    """An embedding vector is zero or non-finite."""


class TransportError(EngageKitError):
    """A remote call failed after exhausting retries."""


class ParseError(EngageKitError):
    """Free-text input could not be parsed."""


class SequenceTextError(ParseError):
    """A timestamped action-sequence string violates the grammar."""


class VerdictParseError(ParseError):
    """A classifier response contains no recognizable engagement label."""

    def __init__(self, message: str, raw_response: str = ""):
        super().__init__(message)
        self.raw_response = raw_response
