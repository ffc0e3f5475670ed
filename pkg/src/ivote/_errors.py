class IvoteError(Exception):
    """Base class of all errors raised by ivote."""


class DomainError(IvoteError, ValueError):
    """A surface cannot be evaluated at the requested coordinates.

    Parameters
    ----------
    message
        human readable description
    model_tag, optional
        tag of the surface family, by default None
    """

    def __init__(self, message, model_tag=None):
        super().__init__(message)
        self.model_tag = model_tag


class InstanceFormatError(IvoteError, ValueError):
    """An instance file could not be parsed.

    Parameters
    ----------
    message
        description of the problem
    line_number
        1-based line of the offending record
    """

    def __init__(self, message, line_number):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class UsageError(IvoteError):
    """Invalid combination of model, algorithm or options."""


class UnsupportedModelError(UsageError):
    """The requested operation has no implementation for this model."""
