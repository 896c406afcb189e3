"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Malformed or inconsistent input. The CLI maps this to exit code 2."""


class BudgetError(RuntimeError):
    """A search or construction ran out of its configured budget (exit code 3).

    ``partial`` carries whatever partial result the caller may want to inspect.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InsufficientStreamError(BudgetError):
    """A finite stream ended before an element of the required size appeared."""


class InjectivityConflict(ValidationError):
    """Two distinct window elements were forced onto the same image."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair
