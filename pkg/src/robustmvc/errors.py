"""Exception hierarchy shared by the library and the command-line tool."""


class MVCError(Exception):
    """Base class for all toolkit errors."""


class ArgumentError(MVCError, ValueError):
    """Invalid argument or violated precondition."""


class DataError(MVCError):
    """Input data is malformed (non-finite values, bad file contents)."""


class StructuralError(DataError):
    """Views disagree in shape or layout."""


class SchemaError(DataError):
    """A configuration document violates the expected schema.

    ``field`` holds the dotted path of the offending entry.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class CompatibilityError(DataError):
    """A checkpoint does not fit the data it is applied to."""
