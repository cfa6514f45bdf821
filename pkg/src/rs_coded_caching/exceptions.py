"""Exceptions for rs_coded_caching package."""


class CodedCachingError(Exception):
    """Base class for all errors raised by rs_coded_caching."""


class ParameterOutOfRangeError(CodedCachingError, ValueError):
    """Exception raised when a construction or calculator parameter is out of range."""


class InvalidGraphError(CodedCachingError, ValueError):
    """Exception raised when a graph is not a valid Ruzsa-Szemerédi graph."""


class DimensionMismatchError(CodedCachingError, ValueError):
    """Exception raised when a graph, library and demand vector disagree in size."""


class MissingTransmissionError(CodedCachingError):
    """Exception raised when a decoder needs a transmission it did not receive."""


class UndecodableError(CodedCachingError):
    """Exception raised when a demanded packet cannot be recovered from the cache.

    This only happens when a matching is not induced.
    """


class UnknownUserError(CodedCachingError, KeyError):
    """Exception raised when a real user is not present in a virtual pool."""


class InvalidScriptError(CodedCachingError, ValueError):
    """Exception raised for an invalid insert/delete churn script."""


class NoFeasibleConstructionError(CodedCachingError):
    """Exception raised when no family instance reaches K' under the memory budget."""


class EventLogError(CodedCachingError):
    """Exception raised when an event log cannot be parsed or fails its audit."""

    def __init__(self, message: str, *, line: int | None = None) -> None:
        """Create an error, optionally pointing at a 1-based log line."""
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
