"""Exception hierarchy. Every library error derives from :class:`PyrolensError`."""


class PyrolensError(Exception):
    pass


class ArgumentError(PyrolensError, ValueError):
    """An argument is outside its documented domain."""


class SchemaError(PyrolensError, ValueError):
    """Input file lacks a required column or key."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ParseError(PyrolensError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(PyrolensError, ValueError):
    """Parsed data violates an invariant (non-finite value, bad label...)."""


class DegenerateError(PyrolensError, ValueError):
    """The computation is undefined for this input (constant column, single class...)."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class RankError(PyrolensError, ValueError):
    pass


class SizeError(PyrolensError, ValueError):
    pass


class ConfigError(PyrolensError, ValueError):
    """Malformed configuration document (search space, generator spec, params)."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class VersionError(PyrolensError, ValueError):
    pass
