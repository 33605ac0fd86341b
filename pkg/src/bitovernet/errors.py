"""Exception hierarchy. ``exit_code`` is what the CLI returns for each class."""


class BitOverNetError(Exception):
    exit_code = 1


class ParameterError(BitOverNetError, ValueError):
    """Invalid argument value."""


class DomainError(ParameterError):
    """Argument outside the domain where a formula is defined."""


class ConnectivityError(BitOverNetError):
    """Operation requires a connected graph."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class DegenerateModelError(BitOverNetError):
    """The model collapses, e.g. a logarithm base <= 1."""

    exit_code = 3


class NoEquilibriumError(DomainError):
    pass


class InsufficientDataError(ParameterError):
    pass


class ParseError(BitOverNetError):
    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
