"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An operation received inputs that violate its contract."""


class NumericFailureError(ArithmeticError):
    """A computation produced non-finite values."""
