"""Exception hierarchy."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class NumericalError(ArithmeticError):
    """A computation degenerated numerically (underflow of all weights, lost sign, ...)."""


class ConvergenceError(RuntimeError):
    """An iterative method stopped before meeting its tolerance.

    Attributes
    ----------
    last : object
        The last iterate.
    residual : float
        The residual (gradient norm, equation mismatch, ...) at ``last``.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message, last=None, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.iterations = iterations
