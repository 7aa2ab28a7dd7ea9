"""Exception types raised by margjoint."""


class DomainError(ValueError):
    """Input or parameter outside the domain where a quantity is defined."""


class ConvergenceError(RuntimeError):
    """Iterative solver hit its iteration cap.

    The best iterate seen so far is kept on ``best`` so callers can still
    inspect or report it.
    """

    def __init__(self, message, best=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.iterations = iterations
