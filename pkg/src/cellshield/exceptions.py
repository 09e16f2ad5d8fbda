"""Errors raised by estimation and selection routines."""


class NotComputableError(ArithmeticError):
    """An estimate does not exist numerically (singular or indefinite input)."""


class DegenerateGridError(ValueError):
    """A regularization grid has a zero upper bound and cannot be built."""
