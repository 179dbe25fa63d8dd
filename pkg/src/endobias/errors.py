"""Exception hierarchy shared by every audit."""


class AuditError(Exception):
    """Base class for all errors raised by endobias."""


class ParameterError(AuditError, ValueError):
    """An argument is outside its valid domain."""


class SchemaError(AuditError, KeyError):
    """A named column, attribute or axis does not exist."""

    def __str__(self):
        # KeyError repr-quotes its message; keep it readable
        return str(self.args[0]) if self.args else ""


class ParseError(AuditError, ValueError):
    """A cell in an input file could not be parsed."""


class EmptyInputError(AuditError, ValueError):
    """The input holds no usable records or cells."""


class SampleSizeError(AuditError, ValueError):
    """Too few observations for the requested estimate."""


class DegenerateDataError(AuditError, ValueError):
    """The data have zero spread where spread is required."""


class EmptyWindowError(AuditError, ValueError):
    """A comparison window contains no valid cells."""
