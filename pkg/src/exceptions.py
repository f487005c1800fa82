class CapacityError(ValueError):
    """A configured memory, point or enumeration budget would be exceeded."""


class NyquistError(ValueError):
    """The quadrature grid is too coarse for the requested moment."""


class FitConditioningError(ValueError):
    """A least-squares fit is too ill-conditioned to be trusted."""


class ZeroTableError(ValueError):
    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class AcceptanceError(Exception):
    """A verify-mode comparison fell outside its tolerance."""
