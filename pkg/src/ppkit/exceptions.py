"""Exception hierarchy used across ppkit."""


class PPKitError(Exception):
    """Base class for all ppkit errors."""


class ParseError(PPKitError, ValueError):
    """A dataset line could not be decoded."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class SchemaError(PPKitError, ValueError):
    """Data violates a structural invariant (mixed kinds, bad labels, NaN...)."""


class EmptyPatternError(PPKitError, ValueError):
    """A set distance that is undefined on empty patterns received one.

    ``which`` names the offending argument (``"X"``/``"Y"``) or pattern ids.
    """

    def __init__(self, message, which=None):
        self.which = which
        super().__init__(message)


class DegenerateError(PPKitError, ValueError):
    """A data-driven quantity is undefined (zero separation, zero spread...)."""
