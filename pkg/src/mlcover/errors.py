"""Exception hierarchy shared by every module.

The CLI maps :class:`ValidationError` to exit code 2 and
:class:`BudgetError` to exit code 3.
"""


class MlcoverError(Exception):
    pass


class ValidationError(MlcoverError, ValueError):
    """Bad input: malformed file, violated precondition, dimension mismatch."""


class BudgetError(MlcoverError):
    """A configured enumeration or search cap was exceeded."""


class EnumerationOverflow(BudgetError):
    def __init__(self, what, count, cap):
        super().__init__(f"{what} has {count} elements, above the enumeration cap {cap}")
        self.count = count
        self.cap = cap


class SearchBudgetExceeded(BudgetError):
    def __init__(self, message, incumbent=None):
        super().__init__(message)
        self.incumbent = incumbent


class InsufficientCandidates(ValidationError):
    pass


class NoCoverError(ValidationError):
    def __init__(self, uncoverable):
        uncoverable = sorted(uncoverable, key=repr)
        super().__init__(f"no cover exists; uncoverable elements: {uncoverable}")
        self.uncoverable = uncoverable


class InvalidOrder(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
