class DftwsError(Exception):
    """Base class for errors raised by this package."""


class MalformedInput(DftwsError, ValueError):
    """An encoding (hex, key, signature, JSON document) is not well formed."""


class ProtocolViolation(DftwsError, ValueError):
    """A protocol precondition or record invariant does not hold."""
