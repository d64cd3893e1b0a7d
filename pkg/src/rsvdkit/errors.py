"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class NonFiniteError(ArithmeticError):
    """Input matrix contains NaN or infinite entries."""


class ConvergenceError(ArithmeticError):
    """Iterative diagonalization did not converge within its sweep limit."""

    def __init__(self, message, sweeps):
        super().__init__(message)
        self.sweeps = sweeps


class DmatError(ValueError):
    """A DMAT file is malformed. Carries the file path and the byte offset."""

    def __init__(self, path, offset, reason):
        super().__init__(f"{path}: byte offset {offset}: {reason}")
        self.path = str(path)
        self.offset = offset
        self.reason = reason
