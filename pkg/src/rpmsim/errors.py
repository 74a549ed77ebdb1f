"""Exception hierarchy shared by samplers, diagnostics and the CLI."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to reach a usable answer."""


class TruncationOverflowError(NumericalError):
    """An epsilon stopping rule ran past its cap without triggering."""

    def __init__(self, message, partial_length):
        super().__init__(message)
        self.partial_length = partial_length
