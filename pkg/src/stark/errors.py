class NumericalError(ArithmeticError):
    """A numerical stage failed (non-PSD system, bisection did not bracket, ...)."""


class NotPSDError(NumericalError, ValueError):
    pass
